#include "uavicl/channel.hpp"

#include <cmath>
#include <numbers>

#include "uavicl/errors.hpp"

namespace uavicl::channel {

namespace {
constexpr double kDeg = 180.0 / std::numbers::pi;
}

void ChannelParams::validate() const {
    if (!(a > 0.0)) throw ConfigError("channel.a", "must be > 0");
    if (!(b > 0.0)) throw ConfigError("channel.b", "must be > 0");
    if (!std::isfinite(eta_los_db)) throw ConfigError("channel.eta_los_db", "must be finite");
    if (!(eta_nlos_db >= eta_los_db) || !std::isfinite(eta_nlos_db))
        throw ConfigError("channel.eta_nlos_db", "must be finite and >= eta_los_db");
    if (!(carrier_hz > 0.0)) throw ConfigError("channel.carrier_hz", "must be > 0");
    if (!(light_speed > 0.0)) throw ConfigError("channel.light_speed", "must be > 0");
    if (!(coverage_radius_m > 0.0)) throw ConfigError("channel.coverage_radius_m", "must be > 0");
}

double horizontal_distance(const Pose3D& uav, const GroundPos& sensor) {
    return std::hypot(uav.x - sensor.x, uav.y - sensor.y);
}

double elevation_angle_deg(const Pose3D& uav, const GroundPos& sensor) {
    const double d = horizontal_distance(uav, sensor);
    if (d == 0.0) return 90.0;
    return std::atan(uav.h / d) * kDeg;
}

double los_probability(double phi_deg, const ChannelParams& p) {
    return 1.0 / (1.0 + p.a * std::exp(-p.b * (phi_deg - p.a)));
}

PathLoss path_loss(const Pose3D& uav, const GroundPos& sensor, const ChannelParams& p) {
    const double phi = elevation_angle_deg(uav, sensor);
    PathLoss out;
    double range = 0.0;
    if (p.range_mode == RangeMode::slant) {
        // d * sec(atan(h/d)) == sqrt(d^2 + h^2); the d -> 0 limit is h.
        range = std::hypot(horizontal_distance(uav, sensor), uav.h);
    } else {
        double phi_c = phi;
        if (phi_c > ChannelParams::max_elevation_deg) {
            phi_c = ChannelParams::max_elevation_deg;
            out.clamped = true;
        }
        range = p.coverage_radius_m / std::cos(phi_c / kDeg);
    }
    const double plos = los_probability(phi, p);
    out.db = plos * (p.eta_los_db - p.eta_nlos_db) + 20.0 * std::log10(range) +
             20.0 * std::log10(p.carrier_hz) +
             20.0 * std::log10(4.0 * std::numbers::pi / p.light_speed) + p.eta_nlos_db;
    return out;
}

}  // namespace uavicl::channel
