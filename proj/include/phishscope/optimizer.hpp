#pragma once

// Query-budgeted black-box optimizer over the manipulations, adversarial
// advantage bookkeeping, primary-attack attribution and corpus augmentation.
//
// A "query" is one page-level evaluation of a candidate. The initial score
// C_o of the unmodified page is not charged to the budget.

#include <cmath>
#include <functional>
#include <map>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "phishscope/detector.hpp"
#include "phishscope/manipulations.hpp"

namespace phishscope {

using Evaluator = std::function<double(const std::string& html)>;

inline std::vector<ManipulationId> default_sr_set() {
    using M = ManipulationId;
    return {M::A6, M::A7, M::A8, M::A9, M::A11, M::A12, M::A13, M::A14, M::A15, M::A10};
}

inline std::vector<ManipulationId> default_mr_set() {
    using M = ManipulationId;
    return {M::A1, M::A2, M::A3, M::A4, M::A5};
}

struct OptimizerConfig {
    size_t Q = 35;
    std::vector<ManipulationId> sr_set = default_sr_set();
    std::vector<ManipulationId> mr_set = default_mr_set();
    ManipulationParams params;
    double threshold = 0.5;
    std::set<ManipulationId> disabled;  // skipped entirely (Scenario 2 reruns)

    // R = (Q - #SR) / #MR, floored
    size_t rounds() const {
        if (mr_set.empty() || Q < sr_set.size()) return 0;
        return (Q - sr_set.size()) / mr_set.size();
    }
};

struct StageRecord {
    std::string phase;  // "SR" or "MR"
    size_t round = 0;   // MR round, 0 for SR
    ManipulationId id = ManipulationId::A1;
    bool applied = false;
    bool kept = false;
    double score = 0.0;      // candidate score (NaN when not evaluated)
    double c_p = 0.0;        // best score after this stage
    double advantage = 0.0;  // C_o - C_p
    double gain = 0.0;       // best before - best after; credited to the kept candidate only
    size_t queries_used = 0;
    std::string note;
};

struct AttackRun {
    std::string doc_id;
    double c_o = 0.0;
    std::vector<StageRecord> stages;
    std::string best_html;
    double best_score = 0.0;
    size_t queries = 0;
    size_t rounds = 0;
    size_t budget = 0;
    std::vector<ManipulationId> sr_set, mr_set;
    std::vector<ManipulationId> primary_attacks;
    bool scenario1 = false;
    bool scenario2 = false;

    double advantage() const { return c_o - best_score; }

    std::map<ManipulationId, double> gains() const {
        std::map<ManipulationId, double> g;
        for (const auto& s : stages) g[s.id] += s.gain;
        return g;
    }
};

inline uint64_t stage_seed(uint64_t base, size_t round, ManipulationId id) {
    return fnv1a64(std::to_string(base) + "/" + std::to_string(round) + "/" + std::string(to_string(id)));
}

inline AttackRun optimize(const std::string& html, std::string_view page_url, const Evaluator& evaluate,
                          const OptimizerConfig& cfg, std::string doc_id = {}) {
    AttackRun run;
    run.doc_id = std::move(doc_id);
    run.budget = cfg.Q;
    run.rounds = cfg.rounds();
    run.sr_set = cfg.sr_set;
    run.mr_set = cfg.mr_set;
    run.c_o = evaluate(html);
    if (run.c_o < cfg.threshold) throw NotPhishing("initial confidence below threshold");
    run.best_html = html;
    run.best_score = run.c_o;

    auto charge = [&](const std::string& candidate) {
        if (run.queries >= cfg.Q) throw Error("query budget exceeded");
        ++run.queries;
        return evaluate(candidate);
    };
    auto params_for = [&](size_t round, ManipulationId id) {
        auto p = cfg.params;
        p.seed = stage_seed(cfg.params.seed, round, id);
        return p;
    };

    for (ManipulationId id : cfg.sr_set) {
        if (cfg.disabled.count(id)) continue;
        StageRecord st;
        st.phase = "SR";
        st.id = id;
        auto cand = apply_manipulation(run.best_html, id, params_for(0, id), page_url);
        st.applied = cand.applied;
        st.note = cand.note;
        st.score = std::nan("");
        if (cand.applied) {
            st.score = charge(cand.html);
            if (st.score < run.best_score) {
                st.gain = run.best_score - st.score;
                st.kept = true;
                run.best_score = st.score;
                run.best_html = std::move(cand.html);
            }
        }
        st.c_p = run.best_score;
        st.advantage = run.c_o - run.best_score;
        st.queries_used = run.queries;
        run.stages.push_back(std::move(st));
    }

    for (size_t r = 1; r <= run.rounds; ++r) {
        size_t first = run.stages.size();
        long best_idx = -1;
        std::vector<std::string> candidates;
        for (ManipulationId id : cfg.mr_set) {
            if (cfg.disabled.count(id)) continue;
            StageRecord st;
            st.phase = "MR";
            st.round = r;
            st.id = id;
            auto cand = apply_manipulation(run.best_html, id, params_for(r, id), page_url);
            st.applied = cand.applied;
            st.note = cand.note;
            st.score = std::nan("");
            if (cand.applied) {
                st.score = charge(cand.html);
                if (best_idx < 0 || st.score < run.stages[static_cast<size_t>(best_idx)].score)
                    best_idx = static_cast<long>(run.stages.size());
            }
            st.queries_used = run.queries;
            candidates.push_back(std::move(cand.html));
            run.stages.push_back(std::move(st));
        }
        if (best_idx >= 0 && run.stages[static_cast<size_t>(best_idx)].score < run.best_score) {
            auto& winner = run.stages[static_cast<size_t>(best_idx)];
            winner.kept = true;
            winner.gain = run.best_score - winner.score;
            run.best_score = winner.score;
            run.best_html = std::move(candidates[static_cast<size_t>(best_idx) - first]);
        }
        for (size_t i = first; i < run.stages.size(); ++i) {
            run.stages[i].c_p = run.best_score;
            run.stages[i].advantage = run.c_o - run.best_score;
        }
    }
    return run;
}

// Scenario 1: the stage with the largest gain is primary; any other
// manipulation whose gain is within one population sigma of it is co-primary.
inline std::vector<ManipulationId> primary_from_gains(const std::map<ManipulationId, double>& gains, double sigma) {
    double top = 0.0;
    for (const auto& [id, g] : gains) top = std::max(top, g);
    std::vector<ManipulationId> out;
    if (top <= 0.0) return out;
    for (const auto& [id, g] : gains)
        if (g > 0.0 && top - g <= sigma) out.push_back(id);
    return out;
}

// Population standard deviation of every stage gain across the runs.
inline double population_sigma(const std::vector<AttackRun>& runs) {
    double sum = 0, sq = 0;
    size_t n = 0;
    for (const auto& r : runs)
        for (const auto& s : r.stages) {
            sum += s.gain;
            sq += s.gain * s.gain;
            ++n;
        }
    if (n == 0) return 0.0;
    double mean = sum / double(n);
    return std::sqrt(std::max(0.0, sq / double(n) - mean * mean));
}

// Fills run.primary_attacks. With an evaluator, Scenario 2 reruns the
// optimizer once with the primaries disabled and promotes the rerun's top
// manipulation if its gain is within sigma of the removed primary's.
inline void attribute_primary_attacks(AttackRun& run, double sigma, const std::string* original_html = nullptr,
                                      std::string_view page_url = {}, const Evaluator* evaluate = nullptr,
                                      const OptimizerConfig* cfg = nullptr) {
    auto gains = run.gains();
    run.primary_attacks = primary_from_gains(gains, sigma);
    run.scenario1 = run.primary_attacks.size() > 1;
    run.scenario2 = false;
    if (run.primary_attacks.empty() || !original_html || !evaluate || !cfg) return;
    double removed = 0.0;
    for (auto id : run.primary_attacks) removed = std::max(removed, gains[id]);
    OptimizerConfig rerun_cfg = *cfg;
    for (auto id : run.primary_attacks) rerun_cfg.disabled.insert(id);
    auto rerun = optimize(*original_html, page_url, *evaluate, rerun_cfg, run.doc_id);
    std::optional<ManipulationId> best;
    double best_gain = 0.0;
    for (const auto& [id, g] : rerun.gains())
        if (g > best_gain) {
            best_gain = g;
            best = id;
        }
    if (best && best_gain > 0.0 && std::abs(removed - best_gain) <= sigma) {
        run.primary_attacks.push_back(*best);
        run.scenario2 = true;
    }
}

inline Evaluator pipeline_evaluator(const Pipeline& pipeline, std::string url) {
    return [&pipeline, url = std::move(url)](const std::string& html) {
        return pipeline.classify_html(html, url).confidence;
    };
}

struct AugmentResult {
    std::vector<LabeledDocument> documents;
    std::vector<AttackRun> runs;
    double sigma = 0.0;
};

// Best adversarial variant of every document whose primaries include
// `target`, labelled phishing. Documents the pipeline does not flag are skipped.
inline AugmentResult augment_corpus(const std::vector<LabeledDocument>& corpus, const Pipeline& pipeline,
                                    const OptimizerConfig& cfg, ManipulationId target, bool scenario2 = true) {
    AugmentResult out;
    std::vector<const LabeledDocument*> sources;
    for (const auto& d : corpus) {
        auto eval = pipeline_evaluator(pipeline, d.url);
        try {
            out.runs.push_back(optimize(d.html, d.url, eval, cfg, d.id));
            sources.push_back(&d);
        } catch (const NotPhishing&) {
        }
    }
    out.sigma = population_sigma(out.runs);
    for (size_t i = 0; i < out.runs.size(); ++i) {
        auto eval = pipeline_evaluator(pipeline, sources[i]->url);
        if (scenario2)
            attribute_primary_attacks(out.runs[i], out.sigma, &sources[i]->html, sources[i]->url, &eval, &cfg);
        else
            attribute_primary_attacks(out.runs[i], out.sigma);
        const auto& prim = out.runs[i].primary_attacks;
        if (std::find(prim.begin(), prim.end(), target) != prim.end())
            out.documents.push_back({sources[i]->id + "#adv-" + std::string(to_string(target)), sources[i]->url,
                                     out.runs[i].best_html, Label::phishing});
    }
    if (out.documents.empty())
        throw EmptySelection(std::string("no document has ") + std::string(to_string(target)) + " as a primary attack");
    return out;
}

inline nlohmann::json attack_run_to_json(const AttackRun& run) {
    auto ids = [](const std::vector<ManipulationId>& v) {
        nlohmann::json a = nlohmann::json::array();
        for (auto id : v) a.push_back(to_string(id));
        return a;
    };
    nlohmann::json stages = nlohmann::json::array();
    for (const auto& s : run.stages) {
        nlohmann::json j = {{"phase", s.phase},
                            {"round", s.round},
                            {"manipulation", to_string(s.id)},
                            {"name", info(s.id).name},
                            {"applied", s.applied},
                            {"kept", s.kept},
                            {"score", std::isnan(s.score) ? nlohmann::json(nullptr) : nlohmann::json(s.score)},
                            {"c_p", s.c_p},
                            {"advantage", s.advantage},
                            {"gain", s.gain},
                            {"queries_used", s.queries_used}};
        if (!s.note.empty()) j["note"] = s.note;
        stages.push_back(j);
    }
    return {{"doc", run.doc_id},
            {"c_o", run.c_o},
            {"best_score", run.best_score},
            {"advantage", run.advantage()},
            {"queries", run.queries},
            {"budget", run.budget},
            {"rounds", run.rounds},
            {"sr_set", ids(run.sr_set)},
            {"mr_set", ids(run.mr_set)},
            {"primary_attacks", ids(run.primary_attacks)},
            {"scenario1", run.scenario1},
            {"scenario2", run.scenario2},
            {"stages", stages}};
}

}  // namespace phishscope
