#pragma once

// Chunk scorers. The reference scorer is a hashed unigram+bigram logistic
// model; anything else plugs in through ChunkScorer.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <memory>
#include <random>
#include <sstream>
#include <unordered_map>
#include <string>
#include <vector>

#include "phishscope/core.hpp"

namespace phishscope {

class ChunkScorer {
public:
    virtual ~ChunkScorer() = default;
    // Phishing probability in [0, 1]. May throw ScorerUnavailable.
    virtual double score(const std::vector<std::string>& tokens) const = 0;
    virtual std::string name() const = 0;
};

inline double sigmoid(double z) {
    if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
    double e = std::exp(z);
    return e / (1.0 + e);
}

struct Confusion {
    size_t tp = 0, fp = 0, tn = 0, fn = 0;

    void add(Label truth, Label predicted) {
        if (truth == Label::phishing) (predicted == Label::phishing ? tp : fn)++;
        else (predicted == Label::phishing ? fp : tn)++;
    }
    size_t total() const { return tp + fp + tn + fn; }
    double accuracy() const { return total() ? double(tp + tn) / double(total()) : 0.0; }
    double precision() const { return tp + fp ? double(tp) / double(tp + fp) : 0.0; }
    double recall() const { return tp + fn ? double(tp) / double(tp + fn) : 0.0; }
    double f1() const {
        double p = precision(), r = recall();
        return p + r > 0 ? 2 * p * r / (p + r) : 0.0;
    }
};

inline constexpr std::string_view kModelMagic = "phishscope-model";
inline constexpr int kModelFormatVersion = 1;

class ReferenceScorer : public ChunkScorer {
public:
    explicit ReferenceScorer(unsigned bits = 18, uint64_t seed = 0, std::string version = "untrained")
        : bits_(bits), seed_(seed), version_(std::move(version)), weights_(size_t{1} << bits, 0.0) {
        if (bits < 4 || bits > 26) throw Error("feature bits out of range");
    }

    size_t dimension() const { return weights_.size(); }
    unsigned bits() const { return bits_; }
    uint64_t seed() const { return seed_; }
    const std::string& version() const { return version_; }
    double bias() const { return bias_; }
    const std::vector<double>& weights() const { return weights_; }

    size_t feature_index(std::string_view feature) const { return fnv1a64(feature) & (weights_.size() - 1); }

    // Sorted, unique feature indices (binary presence).
    std::vector<size_t> features(const std::vector<std::string>& tokens) const {
        std::vector<size_t> idx;
        idx.reserve(tokens.size() * 2);
        std::string key;
        for (size_t i = 0; i < tokens.size(); ++i) {
            key = "1:";
            key += tokens[i];
            idx.push_back(feature_index(key));
            if (i + 1 < tokens.size()) {
                key = "2:";
                key += tokens[i];
                key += ' ';
                key += tokens[i + 1];
                idx.push_back(feature_index(key));
            }
        }
        std::sort(idx.begin(), idx.end());
        idx.erase(std::unique(idx.begin(), idx.end()), idx.end());
        return idx;
    }

    double margin(const std::vector<size_t>& feats) const {
        double z = bias_;
        for (size_t f : feats) z += weights_[f];
        return z;
    }

    double score(const std::vector<std::string>& tokens) const override { return sigmoid(margin(features(tokens))); }
    std::string name() const override { return "reference"; }

    // Direct parameter access, for hand-built models and training.
    void set_bias(double b) { bias_ = b; }
    void set_weight(std::string_view feature, double w) { weights_[feature_index(feature)] = w; }
    double& weight_at(size_t i) { return weights_.at(i); }
    void set_version(std::string v) { version_ = std::move(v); }

    void save(std::ostream& os) const {
        size_t nnz = 0;
        for (double w : weights_) nnz += w != 0.0;
        os << kModelMagic << ' ' << kModelFormatVersion << '\n'
           << "kind reference\n"
           << "bits " << bits_ << '\n'
           << "seed " << seed_ << '\n'
           << "version " << version_ << '\n'
           << "bias " << hex(bias_) << '\n'
           << "nnz " << nnz << '\n';
        for (size_t i = 0; i < weights_.size(); ++i)
            if (weights_[i] != 0.0) os << i << ' ' << hex(weights_[i]) << '\n';
    }

    static ReferenceScorer load(std::istream& is) {
        std::string magic, key, kind, version;
        int format = 0;
        unsigned bits = 0;
        uint64_t seed = 0;
        if (!(is >> magic >> format) || magic != kModelMagic || format != kModelFormatVersion)
            throw MalformedInput("not a phishscope model file");
        auto expect = [&](std::string_view name) {
            if (!(is >> key) || key != name) throw MalformedInput("model file: expected " + std::string(name));
        };
        expect("kind");
        is >> kind;
        if (kind != "reference") throw MalformedInput("model file: unsupported kind " + kind);
        expect("bits");
        is >> bits;
        expect("seed");
        is >> seed;
        expect("version");
        is >> version;
        ReferenceScorer m(bits, seed, version);
        std::string v;
        expect("bias");
        is >> v;
        m.bias_ = unhex(v);
        size_t nnz = 0;
        expect("nnz");
        is >> nnz;
        for (size_t k = 0; k < nnz; ++k) {
            size_t i = 0;
            if (!(is >> i >> v) || i >= m.weights_.size()) throw MalformedInput("model file: bad weight line");
            m.weights_[i] = unhex(v);
        }
        return m;
    }

    void save_file(const std::string& path) const {
        std::ofstream os(path);
        if (!os) throw Error("cannot write model file " + path);
        save(os);
    }

    static ReferenceScorer load_file(const std::string& path) {
        std::ifstream is(path);
        if (!is) throw Error("cannot read model file " + path);
        return load(is);
    }

private:
    static std::string hex(double d) {
        char buf[64];
        std::snprintf(buf, sizeof buf, "%a", d);
        return buf;
    }
    static double unhex(const std::string& s) {
        char* end = nullptr;
        double d = std::strtod(s.c_str(), &end);
        if (end == s.c_str()) throw MalformedInput("model file: bad number " + s);
        return d;
    }

    unsigned bits_;
    uint64_t seed_;
    std::string version_;
    std::vector<double> weights_;
    double bias_ = 0.0;
};

struct TrainingExample {
    std::vector<std::string> tokens;
    Label label = Label::benign;
    size_t group = 0;  // source document; folds never split a group
};

struct TrainConfig {
    unsigned bits = 18;
    int epochs = 10;
    int folds = 5;
    double learning_rate = 0.2;
    double l2 = 1e-6;
    uint64_t seed = 1;
    bool balance_classes = true;
};

struct FoldReport {
    int fold = 0;
    size_t train_examples = 0;
    size_t test_examples = 0;
    Confusion confusion;
};

struct TrainResult {
    ReferenceScorer model;
    std::vector<FoldReport> folds;  // chunk-level, threshold 0.5
};

namespace detail {

inline ReferenceScorer fit_logistic(const std::vector<const TrainingExample*>& data, const TrainConfig& cfg,
                                    uint64_t seed) {
    ReferenceScorer m(cfg.bits, cfg.seed, "trained");
    std::vector<std::vector<size_t>> feats;
    feats.reserve(data.size());
    size_t pos = 0;
    for (const auto* ex : data) {
        feats.push_back(m.features(ex->tokens));
        pos += ex->label == Label::phishing;
    }
    size_t neg = data.size() - pos;
    double w_pos = 1.0, w_neg = 1.0;
    if (cfg.balance_classes && pos && neg) {
        w_pos = double(data.size()) / (2.0 * double(pos));
        w_neg = double(data.size()) / (2.0 * double(neg));
    }
    std::vector<size_t> order(data.size());
    for (size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::mt19937_64 rng(seed);
    double bias = 0.0;
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), rng);
        double lr = cfg.learning_rate / (1.0 + 0.5 * epoch);
        for (size_t i : order) {
            bool y = data[i]->label == Label::phishing;
            m.set_bias(bias);
            double p = sigmoid(m.margin(feats[i]));
            double g = (p - (y ? 1.0 : 0.0)) * (y ? w_pos : w_neg);
            for (size_t f : feats[i]) {
                double& w = m.weight_at(f);
                w -= lr * (g + cfg.l2 * w);
            }
            bias -= lr * g;
        }
    }
    m.set_bias(bias);
    return m;
}

}  // namespace detail

inline TrainResult train_reference_scorer(const std::vector<TrainingExample>& corpus, const TrainConfig& cfg = {}) {
    bool has_pos = false, has_neg = false;
    for (const auto& ex : corpus) (ex.label == Label::phishing ? has_pos : has_neg) = true;
    if (!has_pos || !has_neg) throw DegenerateCorpus("training corpus needs both phishing and benign examples");

    std::vector<const TrainingExample*> all;
    for (const auto& ex : corpus) all.push_back(&ex);

    TrainResult result{detail::fit_logistic(all, cfg, cfg.seed), {}};
    result.model.set_version("ref-s" + std::to_string(cfg.seed) + "-e" + std::to_string(cfg.epochs));

    if (cfg.folds >= 2) {
        // Fold assignment by group so chunks of one page stay together.
        std::vector<size_t> groups;
        for (const auto& ex : corpus) groups.push_back(ex.group);
        std::sort(groups.begin(), groups.end());
        groups.erase(std::unique(groups.begin(), groups.end()), groups.end());
        std::mt19937_64 rng(cfg.seed ^ 0x5eedf01dULL);
        std::shuffle(groups.begin(), groups.end(), rng);
        std::unordered_map<size_t, int> fold_of;
        for (size_t i = 0; i < groups.size(); ++i) fold_of[groups[i]] = static_cast<int>(i % static_cast<size_t>(cfg.folds));
        for (int f = 0; f < cfg.folds; ++f) {
            std::vector<const TrainingExample*> train, test;
            for (const auto& ex : corpus) (fold_of[ex.group] == f ? test : train).push_back(&ex);
            FoldReport rep;
            rep.fold = f;
            rep.train_examples = train.size();
            rep.test_examples = test.size();
            bool ok_pos = false, ok_neg = false;
            for (const auto* ex : train) (ex->label == Label::phishing ? ok_pos : ok_neg) = true;
            if (ok_pos && ok_neg && !test.empty()) {
                auto m = detail::fit_logistic(train, cfg, cfg.seed + static_cast<uint64_t>(f) + 1);
                for (const auto* ex : test)
                    rep.confusion.add(ex->label, m.score(ex->tokens) >= 0.5 ? Label::phishing : Label::benign);
            }
            result.folds.push_back(rep);
        }
    }
    return result;
}

}  // namespace phishscope
