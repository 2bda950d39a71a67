#pragma once

#include <stdexcept>
#include <string>

namespace uavicl {

// Invalid user-supplied configuration. `field()` names the offending key.
class ConfigError : public std::runtime_error {
public:
    ConfigError(std::string field, const std::string& what)
        : std::runtime_error(field + ": " + what), field_(std::move(field)) {}
    const std::string& field() const noexcept { return field_; }

private:
    std::string field_;
};

// A violated runtime precondition (stepping a finished episode, no alive sensors, ...).
class RuntimeFault : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace uavicl
