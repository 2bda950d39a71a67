#include "uavicl/guardrails.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <vector>

#include "uavicl/errors.hpp"

namespace uavicl::guard {

namespace {
constexpr unsigned char kUnknown = 0x01;
constexpr unsigned char kPad = 0x02;

std::string to_hex(std::string_view s) {
    static const char* digits = "0123456789abcdef";
    std::string out;
    for (unsigned char c : s) {
        out.push_back(digits[c >> 4]);
        out.push_back(digits[c & 15]);
    }
    return out;
}

std::string from_hex(const std::string& h) {
    if (h.size() % 2) throw ConfigError("benign_lm", "odd-length hex key");
    std::string out;
    for (std::size_t i = 0; i < h.size(); i += 2)
        out.push_back(static_cast<char>(std::stoi(h.substr(i, 2), nullptr, 16)));
    return out;
}

double nearest_rank(std::vector<double> v, double q) {
    std::sort(v.begin(), v.end());
    auto rank = static_cast<std::size_t>(std::ceil(q * static_cast<double>(v.size())));
    rank = std::clamp<std::size_t>(rank, 1, v.size());
    return v[rank - 1];
}
}  // namespace

void SafetyWeights::validate() const {
    for (auto [v, f] : {std::pair{w_q, "w_q"}, {w_gamma, "w_gamma"}, {w_b, "w_b"}})
        if (!(v >= 0.0)) throw ConfigError(std::string("safety.") + f, "must be >= 0");
    if (std::abs(w_q + w_gamma + w_b - 1.0) > 1e-9)
        throw ConfigError("safety", "weights must sum to 1");
    if (!(tau_safe >= 0.0 && tau_safe <= 1.0)) throw ConfigError("safety.tau_safe", "must be in [0,1]");
    if (battery_reserve_j && !(*battery_reserve_j >= 0.0))
        throw ConfigError("safety.battery_reserve_j", "must be >= 0");
}

double normalized_gain(const SensorObs& s, const Observation& obs) {
    double lo = s.gain_db, hi = s.gain_db;
    for (const auto& o : obs.sensors) {
        lo = std::min(lo, o.gain_db);
        hi = std::max(hi, o.gain_db);
    }
    if (hi == lo) return 1.0;
    return (s.gain_db - lo) / (hi - lo);
}

double score_sensor(const SensorObs& s, const Observation& obs, const SafetyWeights& w) {
    if (s.battery_j < w.reserve_for(obs)) return 0.0;
    const double q = static_cast<double>(s.queue) / obs.buffer_depth;
    const double g = s.gain_db > obs.gamma_th_db ? normalized_gain(s, obs) : 0.0;
    const double b = s.battery_j / obs.battery_capacity_j;
    return w.w_q * q + w.w_gamma * g + w.w_b * b;
}

ScheduleAction best_scoring(const Observation& obs, const SafetyWeights& w) {
    if (obs.sensors.empty()) throw RuntimeFault("verifier: no alive sensors");
    const SensorObs* best = nullptr;
    double best_score = -1.0;
    for (const auto& s : obs.sensors) {
        const double sc = score_sensor(s, obs, w);
        if (sc > best_score) {
            best = &s;
            best_score = sc;
        }
    }
    char why[96];
    std::snprintf(why, sizeof why, "verifier override: sensor %d has the highest safety score",
                  best->id);
    return {best->id, world::Provenance::verifier_override, why};
}

ScheduleAction verify(const ScheduleAction& proposed, const Observation& obs, const SafetyWeights& w) {
    if (const SensorObs* s = obs.find(proposed.sensor_id); s && score_sensor(*s, obs, w) >= w.tau_safe)
        return proposed;
    return best_scoring(obs, w);
}

BenignLm BenignLm::train(std::span<const std::string> corpus, int order, double smoothing) {
    if (corpus.empty()) throw ConfigError("benign_corpus", "corpus is empty");
    if (order < 1) throw ConfigError("benign_lm.order", "must be >= 1");
    if (!(smoothing > 0.0)) throw ConfigError("benign_lm.smoothing", "must be > 0");
    BenignLm lm;
    lm.order_ = order;
    lm.k_ = smoothing;
    for (const auto& text : corpus)
        for (unsigned char c : text)
            if (!lm.in_vocab_[c] && c != kUnknown && c != kPad) {
                lm.in_vocab_[c] = true;
                ++lm.vocab_count_;
            }

    // Per-text counts are kept for the leave-one-out calibration below.
    using Counts = std::map<std::pair<std::string, unsigned char>, std::int64_t>;
    std::vector<Counts> own(corpus.size());
    for (std::size_t d = 0; d < corpus.size(); ++d) {
        const std::string& text = corpus[d];
        for (std::size_t i = 0; i < text.size(); ++i) {
            const unsigned char c = lm.canon(static_cast<unsigned char>(text[i]));
            std::string ctx = lm.context_at(text, i);
            auto& entry = lm.table_[ctx];
            ++entry.total;
            ++entry.next[c];
            ++own[d][{std::move(ctx), c}];
        }
    }

    std::vector<double> ppl;
    ppl.reserve(corpus.size());
    for (std::size_t d = 0; d < corpus.size(); ++d) {
        const std::string& text = corpus[d];
        if (text.empty()) continue;
        std::map<std::string, std::int64_t> own_total;
        for (const auto& [key, n] : own[d]) own_total[key.first] += n;
        double nll = 0.0;
        for (std::size_t i = 0; i < text.size(); ++i) {
            const unsigned char c = lm.canon(static_cast<unsigned char>(text[i]));
            const std::string ctx = lm.context_at(text, i);
            const auto& entry = lm.table_.at(ctx);
            const auto it = entry.next.find(c);
            std::int64_t count = it == entry.next.end() ? 0 : it->second;
            std::int64_t total = entry.total;
            if (corpus.size() > 1) {
                count -= own[d].at({ctx, c});
                total -= own_total.at(ctx);
            }
            nll -= std::log(lm.prob_from(count, total));
        }
        ppl.push_back(std::exp(nll / static_cast<double>(text.size())));
    }
    if (ppl.empty()) throw ConfigError("benign_corpus", "all corpus texts are empty");
    lm.p50_ = nearest_rank(ppl, 0.50);
    lm.p95_ = nearest_rank(ppl, 0.95);
    return lm;
}

unsigned char BenignLm::canon(unsigned char c) const { return in_vocab_[c] ? c : kUnknown; }

std::string BenignLm::context_at(std::string_view text, std::size_t i) const {
    const std::size_t n = static_cast<std::size_t>(order_ - 1);
    std::string ctx(n, static_cast<char>(kPad));
    for (std::size_t k = 0; k < n; ++k) {
        const std::size_t back = n - k;
        if (i >= back) ctx[k] = static_cast<char>(canon(static_cast<unsigned char>(text[i - back])));
    }
    return ctx;
}

double BenignLm::prob_from(std::int64_t count, std::int64_t total) const {
    const double v = static_cast<double>(vocab_size());
    return (static_cast<double>(count) + k_) / (static_cast<double>(total) + k_ * v);
}

double BenignLm::conditional(std::string_view context, unsigned char next) const {
    std::string ctx;
    for (unsigned char c : context) ctx.push_back(static_cast<char>(c == kPad ? kPad : canon(c)));
    const unsigned char c = canon(next);
    const auto it = table_.find(ctx);
    if (it == table_.end()) return prob_from(0, 0);
    const auto n = it->second.next.find(c);
    return prob_from(n == it->second.next.end() ? 0 : n->second, it->second.total);
}

double BenignLm::perplexity(std::string_view text) const {
    if (text.empty()) return 1.0;
    double nll = 0.0;
    for (std::size_t i = 0; i < text.size(); ++i)
        nll -= std::log(conditional(context_at(text, i), static_cast<unsigned char>(text[i])));
    return std::exp(nll / static_cast<double>(text.size()));
}

nlohmann::json BenignLm::to_json() const {
    std::string vocab;
    for (int c = 0; c < 256; ++c)
        if (in_vocab_[static_cast<std::size_t>(c)]) vocab.push_back(static_cast<char>(c));
    // Sorted keys make the file deterministic.
    std::map<std::string, std::int64_t> grams;
    for (const auto& [ctx, entry] : table_)
        for (const auto& [c, n] : entry.next) grams[to_hex(ctx + static_cast<char>(c))] = n;
    nlohmann::json j;
    j["format"] = "uavicl.benign_lm";
    j["version"] = 1;
    j["order"] = order_;
    j["smoothing"] = k_;
    j["vocab_hex"] = to_hex(vocab);
    j["counts"] = grams;
    j["benign_perplexity_p50"] = p50_;
    j["benign_perplexity_p95"] = p95_;
    return j;
}

BenignLm BenignLm::from_json(const nlohmann::json& j) {
    if (j.value("format", "") != "uavicl.benign_lm" || j.value("version", 0) != 1)
        throw ConfigError("benign_lm", "unsupported model file format/version");
    BenignLm lm;
    lm.order_ = j.at("order").get<int>();
    lm.k_ = j.at("smoothing").get<double>();
    for (unsigned char c : from_hex(j.at("vocab_hex").get<std::string>())) {
        lm.in_vocab_[c] = true;
        ++lm.vocab_count_;
    }
    for (const auto& [key, n] : j.at("counts").items()) {
        const std::string gram = from_hex(key);
        if (gram.size() != static_cast<std::size_t>(lm.order_))
            throw ConfigError("benign_lm.counts", "gram length does not match order");
        auto& entry = lm.table_[gram.substr(0, gram.size() - 1)];
        const auto cnt = n.get<std::int64_t>();
        entry.total += cnt;
        entry.next[static_cast<unsigned char>(gram.back())] = cnt;
    }
    lm.p50_ = j.at("benign_perplexity_p50").get<double>();
    lm.p95_ = j.at("benign_perplexity_p95").get<double>();
    return lm;
}

bool BenignLm::operator==(const BenignLm& o) const {
    return order_ == o.order_ && k_ == o.k_ && in_vocab_ == o.in_vocab_ &&
           table_ == o.table_ && p50_ == o.p50_ && p95_ == o.p95_;
}

void DefenseParams::validate() const {
    if (!(tau_perplex > 0.0)) throw ConfigError("defense.tau_perplex", "must be > 0");
    if (!(logistic_scale > 0.0)) throw ConfigError("defense.logistic_scale", "must be > 0");
    if (!(eps_base >= 0.0 && eps_base <= 1.0)) throw ConfigError("defense.eps_base", "must be in [0,1]");
}

DefenseParams calibrate_defense(const BenignLm& lm, double eps_base) {
    DefenseParams p;
    p.tau_perplex = lm.p95_benign_perplexity();
    p.logistic_scale =
        std::max((lm.p95_benign_perplexity() - lm.median_benign_perplexity()) / std::log(19.0), 1e-9);
    p.eps_base = eps_base;
    return p;
}

double attack_probability(double perplexity, const DefenseParams& p) {
    return 1.0 / (1.0 + std::exp(-(perplexity - p.tau_perplex) / p.logistic_scale));
}

double update_epsilon(double eps, double p_attack) { return eps + (1.0 - eps) * p_attack; }

}  // namespace uavicl::guard
