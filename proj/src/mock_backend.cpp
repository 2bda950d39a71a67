#include <algorithm>
#include <cctype>
#include <cstdio>
#include <sstream>
#include <vector>

#include "uavicl/llm_backend.hpp"

namespace uavicl::icl {

namespace {

struct Row {
    int id = 0;
    int queue = 0;
    double battery = 0.0;
    double gain = 0.0;
};

struct ParsedPrompt {
    double gamma_th = 0.0;
    int depth = 1;
    double tx_energy = 0.0;
    std::vector<Row> rows;
    std::string examples;
};

std::string lower(std::string s) {
    std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
    return s;
}

std::string section(const std::string& text, const char* header) {
    const auto start = text.find(header);
    if (start == std::string::npos) return {};
    const auto body = text.find('\n', start);
    if (body == std::string::npos) return {};
    const auto next = text.find("\n### ", body);
    return text.substr(body + 1, next == std::string::npos ? std::string::npos : next - body - 1);
}

ParsedPrompt read_prompt(const std::string& text) {
    ParsedPrompt p;
    std::istringstream in(section(text, kSectionHeaders[1]));
    std::string line;
    while (std::getline(in, line)) {
        Row r;
        if (std::sscanf(line.c_str(), "gamma_th_db: %lf", &p.gamma_th) == 1) continue;
        if (std::sscanf(line.c_str(), "buffer_depth: %d", &p.depth) == 1) continue;
        if (std::sscanf(line.c_str(), "tx_energy_j: %lf", &p.tx_energy) == 1) continue;
        if (std::sscanf(line.c_str(), "sensor %d: queue=%d battery_j=%lf gain_db=%lf", &r.id, &r.queue,
                        &r.battery, &r.gain) == 4)
            p.rows.push_back(r);
    }
    p.examples = section(text, kSectionHeaders[3]);
    return p;
}

std::string reply(int id, const std::string& why) {
    return "{\"selected_sensor_id\": " + std::to_string(id) + ", \"rationale\": \"" + why + "\"}";
}

}  // namespace

std::string mock_complete(const std::string& prompt_text, const MockConfig& cfg) {
    const ParsedPrompt p = read_prompt(prompt_text);
    if (p.rows.empty()) return "I could not find any sensors in the input data.";

    if (lower(p.examples).find("prioritize bad channel conditions") != std::string::npos) {
        const Row* worst = &p.rows.front();
        for (const auto& r : p.rows)
            if (r.gain < worst->gain) worst = &r;
        return reply(worst->id, "following the example, the sensor with the worst channel goes first");
    }

    double lo = p.rows.front().gain, hi = lo;
    for (const auto& r : p.rows) {
        lo = std::min(lo, r.gain);
        hi = std::max(hi, r.gain);
    }
    std::vector<const Row*> pool;
    for (const auto& r : p.rows)
        if (r.battery > p.tx_energy) pool.push_back(&r);
    if (pool.empty()) {
        const Row* first = &p.rows.front();
        for (const auto& r : p.rows)
            if (r.id < first->id) first = &r;
        return reply(first->id, "no sensor has enough battery to transmit; defaulting to the lowest id");
    }
    if (cfg.threshold_screen) {
        std::vector<const Row*> good;
        for (const Row* r : pool)
            if (r->gain > p.gamma_th) good.push_back(r);
        if (!good.empty()) pool = std::move(good);
    }
    const Row* best = nullptr;
    double best_score = 0.0;
    for (const Row* r : pool) {
        const double gnorm = hi > lo ? (r->gain - lo) / (hi - lo) : 1.0;
        const double s = cfg.w_q * r->queue / p.depth + (r->gain > p.gamma_th ? cfg.w_gamma * gnorm : 0.0);
        if (!best || s > best_score || (s == best_score && r->id < best->id)) {
            best = r;
            best_score = s;
        }
    }
    return reply(best->id, best->gain > p.gamma_th ? "good channel and the longest queue pressure"
                                                   : "no sensor clears the threshold; longest queue");
}

BackendReply MockBackend::complete(const ChatRequest& req) {
    BackendReply r;
    r.text = mock_complete(req.user, cfg_);
    r.latency_ms = cfg_.latency_base_ms +
                   cfg_.latency_per_kchar_ms * static_cast<double>(req.system.size() + req.user.size()) / 1000.0;
    return r;
}

}  // namespace uavicl::icl
