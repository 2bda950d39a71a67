#pragma once

#include <cstddef>
#include <deque>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "uavicl/world.hpp"

namespace uavicl::icl {

using world::Observation;
using world::ScheduleAction;
using world::StepMetrics;

enum class DemoTag { benign, injected };

struct Demonstration {
    std::string example_input;
    std::string example_output;
    DemoTag tag = DemoTag::benign;

    // Text block as it appears inside the examples section.
    std::string block() const;
};

Demonstration default_benign_demo();
// Reads {"example_input": ..., "example_output": ...}; tag is set by the caller.
Demonstration load_demonstration(const std::string& path, DemoTag tag);

struct FeedbackRecord {
    int t = 0;
    std::string observation_summary;
    int sensor_id = 0;
    int objective_increment = 0;
    std::string note;

    std::string line() const;
};

// Bounded FIFO: appending beyond capacity drops the oldest record.
class FeedbackLedger {
public:
    explicit FeedbackLedger(std::size_t capacity = 8);
    void append(FeedbackRecord r);
    const std::deque<FeedbackRecord>& records() const { return records_; }
    std::size_t capacity() const { return capacity_; }

private:
    std::size_t capacity_;
    std::deque<FeedbackRecord> records_;
};

FeedbackRecord make_feedback(const Observation& obs, const ScheduleAction& action, const StepMetrics& m);
void record_feedback(FeedbackLedger& ledger, const Observation& obs, const ScheduleAction& action,
                     const StepMetrics& m);

struct PromptConfig {
    std::size_t feedback_window = 8;
    std::size_t token_budget = 4096;
    std::size_t chars_per_token = 4;

    void validate() const;
};

struct TaskPrompt {
    std::string system_text;
    std::string goal_text;
    std::string input_data;
    std::vector<std::string> rules;
    std::vector<Demonstration> examples;
    std::vector<FeedbackRecord> feedback;
    std::string output_format;

    std::string user_text() const;
    std::size_t estimated_tokens(std::size_t chars_per_token) const;
};

inline constexpr const char* kSectionHeaders[6] = {"### TASK GOAL", "### INPUT DATA", "### RULES",
                                                  "### EXAMPLES", "### OUTPUT FORMAT", "### FEEDBACK"};

// Throws ConfigError when the prompt exceeds the budget even without feedback.
TaskPrompt build_task_description(const Observation& obs, const FeedbackLedger& ledger,
                                  const std::vector<Demonstration>& demos, const PromptConfig& cfg);

struct ParsedSchedule {
    int selected_sensor_id = 0;
    std::string rationale;
};

struct ParseOutcome {
    std::optional<ParsedSchedule> schedule;
    std::string error;  // set when schedule is empty
};

// Scans for the first balanced JSON object carrying "selected_sensor_id".
ParseOutcome parse_schedule(const std::string& raw_text, int n_sensors);

}  // namespace uavicl::icl
