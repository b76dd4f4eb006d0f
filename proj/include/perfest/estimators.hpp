#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "perfest/calibration.hpp"
#include "perfest/dataset.hpp"
#include "perfest/density_ratio.hpp"
#include "perfest/errors.hpp"
#include "perfest/learners.hpp"
#include "perfest/rng.hpp"

namespace perfest {

// ---------------------------------------------------------------------------
// Metric kinds and realized metrics
// ---------------------------------------------------------------------------

enum class MetricKind { accuracy, f1, precision, recall, auroc };

inline const std::vector<MetricKind>& all_metric_kinds() {
    static const std::vector<MetricKind> kinds = {MetricKind::accuracy, MetricKind::f1,
                                                  MetricKind::precision, MetricKind::recall,
                                                  MetricKind::auroc};
    return kinds;
}

inline const char* to_string(MetricKind k) {
    switch (k) {
        case MetricKind::accuracy: return "accuracy";
        case MetricKind::f1: return "f1";
        case MetricKind::precision: return "precision";
        case MetricKind::recall: return "recall";
        case MetricKind::auroc: return "auroc";
    }
    return "?";
}

inline MetricKind parse_metric_kind(const std::string& s) {
    for (MetricKind k : all_metric_kinds())
        if (s == to_string(k)) return k;
    throw ValidationError("unknown metric: " + s);
}

// Warning bits attached to estimates.
namespace flag {
constexpr unsigned none = 0;
constexpr unsigned degenerate_denominator = 1u << 0;  // ratio metric defined as 0 on 0/0
constexpr unsigned small_chunk = 1u << 1;             // fewer than 10 observations
constexpr unsigned testset_fallback = 1u << 2;        // method fell back to the reference value
constexpr unsigned low_effective_sample = 1u << 3;    // importance weights concentrate badly
constexpr unsigned coverage = 1u << 4;                // production mass outside reference support
constexpr unsigned estimation_error = 1u << 5;        // estimator failed; value is NaN
}  // namespace flag

inline std::string flags_to_string(unsigned f) {
    static const std::pair<unsigned, const char*> names[] = {
        {flag::degenerate_denominator, "degenerate_denominator"},
        {flag::small_chunk, "small_chunk"},
        {flag::testset_fallback, "testset_fallback"},
        {flag::low_effective_sample, "low_effective_sample"},
        {flag::coverage, "coverage"},
        {flag::estimation_error, "estimation_error"},
    };
    std::string out;
    for (const auto& [bit, name] : names) {
        if (f & bit) {
            if (!out.empty()) out += ';';
            out += name;
        }
    }
    return out;
}

namespace detail {

inline void set_flag(unsigned* flags, unsigned bit) {
    if (flags) *flags |= bit;
}

struct WeightedConfusion {
    double tp = 0, fp = 0, tn = 0, fn = 0;
    double total() const { return tp + fp + tn + fn; }
};

inline WeightedConfusion count_confusion(std::span<const int> labels, std::span<const int> preds,
                                         std::span<const double> weights = {}) {
    WeightedConfusion c;
    for (std::size_t i = 0; i < labels.size(); ++i) {
        const double w = weights.empty() ? 1.0 : weights[i];
        if (preds[i] == 1)
            (labels[i] == 1 ? c.tp : c.fp) += w;
        else
            (labels[i] == 1 ? c.fn : c.tn) += w;
    }
    return c;
}

inline double confusion_metric(MetricKind kind, const WeightedConfusion& c, unsigned* flags) {
    switch (kind) {
        case MetricKind::accuracy:
            return (c.tp + c.tn) / c.total();
        case MetricKind::precision:
            if (c.tp + c.fp == 0.0) {
                set_flag(flags, flag::degenerate_denominator);
                return 0.0;
            }
            return c.tp / (c.tp + c.fp);
        case MetricKind::recall:
            if (c.tp + c.fn == 0.0) {
                set_flag(flags, flag::degenerate_denominator);
                return 0.0;
            }
            return c.tp / (c.tp + c.fn);
        case MetricKind::f1:
            if (2.0 * c.tp + c.fp + c.fn == 0.0) {
                set_flag(flags, flag::degenerate_denominator);
                return 0.0;
            }
            return 2.0 * c.tp / (2.0 * c.tp + c.fp + c.fn);
        default:
            throw ValidationError("confusion metric requested for auroc");
    }
}

}  // namespace detail

// Rank-statistic AUROC with per-row weights and average-rank tie handling.
inline double weighted_rank_auroc(std::span<const double> scores, std::span<const int> labels,
                                  std::span<const double> weights = {}) {
    const std::size_t n = scores.size();
    if (n == 0 || labels.size() != n || (!weights.empty() && weights.size() != n))
        throw ValidationError("auroc input length mismatch");

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });

    double w_pos = 0.0, w_neg = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double w = weights.empty() ? 1.0 : weights[i];
        (labels[i] == 1 ? w_pos : w_neg) += w;
    }
    if (w_pos == 0.0 || w_neg == 0.0)
        throw UndefinedMetricError("auroc needs both classes present");

    double neg_below = 0.0, num = 0.0;
    for (std::size_t k = 0; k < n;) {
        std::size_t j = k;
        double g_pos = 0.0, g_neg = 0.0;
        while (j < n && scores[order[j]] == scores[order[k]]) {
            const double w = weights.empty() ? 1.0 : weights[order[j]];
            (labels[order[j]] == 1 ? g_pos : g_neg) += w;
            ++j;
        }
        num += g_pos * (neg_below + 0.5 * g_neg);
        neg_below += g_neg;
        k = j;
    }
    return num / (w_pos * w_neg);
}

// Realized performance of the monitored model on labeled data.
inline double realized_metric(MetricKind kind, std::span<const int> labels,
                              std::span<const int> preds, std::span<const double> scores,
                              unsigned* flags = nullptr) {
    const std::size_t n = labels.size();
    if (n == 0) throw ValidationError("empty input");
    if (preds.size() != n || scores.size() != n) throw ValidationError("input length mismatch");
    if (kind == MetricKind::auroc) return weighted_rank_auroc(scores, labels);
    return detail::confusion_metric(kind, detail::count_confusion(labels, preds), flags);
}

inline double realized_metric(MetricKind kind, const ChunkView& chunk, unsigned* flags = nullptr) {
    return realized_metric(kind, chunk.labels(), chunk.predictions(), chunk.scores(), flags);
}

// ---------------------------------------------------------------------------
// Expectation-based metric reconstruction from calibrated probabilities
// ---------------------------------------------------------------------------

// Expected per-observation confusion rates under calibrated probabilities c and
// binary predictions g. Components sum to 1.
struct EstimatedConfusion {
    double tp = 0, fp = 0, tn = 0, fn = 0;
};

inline EstimatedConfusion estimate_confusion(std::span<const double> cal_probs,
                                             std::span<const int> predictions) {
    const std::size_t n = cal_probs.size();
    if (n == 0 || predictions.size() != n)
        throw ValidationError("confusion estimate needs equal non-empty inputs");
    EstimatedConfusion e;
    for (std::size_t i = 0; i < n; ++i) {
        const double c = cal_probs[i];
        const double g = static_cast<double>(predictions[i]);
        e.tp += c * g;
        e.fp += (1.0 - c) * g;
        e.fn += c * (1.0 - g);
        e.tn += (1.0 - c) * (1.0 - g);
    }
    const double inv = 1.0 / static_cast<double>(n);
    e.tp *= inv;
    e.fp *= inv;
    e.fn *= inv;
    e.tn *= inv;
    return e;
}

inline double metric_from_confusion(MetricKind kind, const EstimatedConfusion& e,
                                    unsigned* flags = nullptr) {
    detail::WeightedConfusion c;
    c.tp = e.tp;
    c.fp = e.fp;
    c.tn = e.tn;
    c.fn = e.fn;
    return detail::confusion_metric(kind, c, flags);
}

// ROC area from calibrated probabilities: thresholds sweep the distinct scores,
// each observation contributes probability mass c to the positive side and
// 1 - c to the negative side.
inline double estimate_auroc(std::span<const double> cal_probs, std::span<const double> scores) {
    const std::size_t n = cal_probs.size();
    if (n == 0 || scores.size() != n) throw ValidationError("auroc estimate length mismatch");
    double pos_mass = 0.0, neg_mass = 0.0;
    for (double c : cal_probs) {
        pos_mass += c;
        neg_mass += 1.0 - c;
    }
    if (pos_mass <= 0.0 || neg_mass <= 0.0)
        throw UndefinedMetricError("estimated auroc needs probability mass in both classes");

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });

    double area = 0.0;
    double tpr_prev = 0.0, fpr_prev = 0.0;
    double tp_acc = 0.0, fp_acc = 0.0;
    for (std::size_t k = 0; k < n;) {
        std::size_t j = k;
        while (j < n && scores[order[j]] == scores[order[k]]) {
            tp_acc += cal_probs[order[j]];
            fp_acc += 1.0 - cal_probs[order[j]];
            ++j;
        }
        const double tpr = tp_acc / pos_mass;
        const double fpr = fp_acc / neg_mass;
        area += (fpr - fpr_prev) * (tpr + tpr_prev) * 0.5;
        tpr_prev = tpr;
        fpr_prev = fpr;
        k = j;
    }
    return area;
}

// Per-observation expectation of the metric (exact for means like accuracy;
// plug-in ratio of expected confusion rates for the others).
inline double expectation_estimate(MetricKind kind, std::span<const double> cal_probs,
                                   std::span<const int> predictions,
                                   std::span<const double> scores, unsigned* flags = nullptr) {
    if (kind == MetricKind::auroc) return estimate_auroc(cal_probs, scores);
    if (kind == MetricKind::accuracy) {
        // mean over rows of c*m(g,1) + (1-c)*m(g,0) with m the equality indicator
        const std::size_t n = cal_probs.size();
        if (n == 0 || predictions.size() != n)
            throw ValidationError("expectation estimate length mismatch");
        double acc = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const double c = cal_probs[i];
            const double m1 = predictions[i] == 1 ? 1.0 : 0.0;
            const double m0 = predictions[i] == 0 ? 1.0 : 0.0;
            acc += c * m1 + (1.0 - c) * m0;
        }
        return acc / static_cast<double>(n);
    }
    return metric_from_confusion(kind, estimate_confusion(cal_probs, predictions), flags);
}

// ---------------------------------------------------------------------------
// Estimation methods
// ---------------------------------------------------------------------------

enum class Method { pape, cbpe, iw, atc, doc, rt_mod, test_set };

inline const std::vector<Method>& all_methods() {
    static const std::vector<Method> methods = {Method::pape,   Method::cbpe, Method::iw,
                                                Method::atc,    Method::doc,  Method::rt_mod,
                                                Method::test_set};
    return methods;
}

inline const char* to_string(Method m) {
    switch (m) {
        case Method::pape: return "pape";
        case Method::cbpe: return "cbpe";
        case Method::iw: return "iw";
        case Method::atc: return "atc";
        case Method::doc: return "doc";
        case Method::rt_mod: return "rt_mod";
        case Method::test_set: return "test_set";
    }
    return "?";
}

inline Method parse_method(const std::string& s) {
    for (Method m : all_methods())
        if (s == to_string(m)) return m;
    throw ValidationError("unknown method: " + s);
}

struct EstimatorConfig {
    std::uint64_t seed = 0;
    double weight_clip = 50.0;
    std::size_t chunk_size = 2000;  // pseudo-chunk size for the reverse-testing bias fit
    int doc_resamples = 50;
    std::size_t doc_sample_size = 2000;
    double doc_lambda_range = 3.0;
    LogisticConfig logistic;

    DreConfig dre() const {
        DreConfig d;
        d.weight_clip = weight_clip;
        d.logistic = logistic;
        return d;
    }
};

struct Estimate {
    double value = std::numeric_limits<double>::quiet_NaN();
    unsigned flags = flag::none;
};

inline double max_confidence(double score) { return score >= 0.5 ? score : 1.0 - score; }

inline std::vector<double> max_confidence(std::span<const double> scores) {
    std::vector<double> mc(scores.size());
    for (std::size_t i = 0; i < scores.size(); ++i) mc[i] = max_confidence(scores[i]);
    return mc;
}

namespace detail {

inline double mean(std::span<const double> v) {
    return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

inline double clamp_metric(double v) { return std::clamp(v, 0.0, 1.0); }

}  // namespace detail

// --- weighted realized metric (importance weighting core) ---

inline double weighted_realized_metric(MetricKind kind, std::span<const int> labels,
                                       std::span<const int> preds, std::span<const double> scores,
                                       std::span<const double> weights, unsigned* flags = nullptr) {
    if (kind == MetricKind::auroc) return weighted_rank_auroc(scores, labels, weights);
    return detail::confusion_metric(kind, detail::count_confusion(labels, preds, weights), flags);
}

// --- PAPE / CBPE ---

namespace detail {

inline double calibrated_estimate(MetricKind kind, const Calibrator& cal, const ChunkView& chunk,
                                  unsigned* flags) {
    if (chunk.size() < 10) set_flag(flags, flag::small_chunk);
    const std::vector<double> probs = cal.calibrate(chunk.scores());
    return expectation_estimate(kind, probs, chunk.predictions(), chunk.scores(), flags);
}

}  // namespace detail

// Full per-chunk pipeline: density-ratio fit against the chunk, weighted
// calibration on reference, expectation-based reconstruction on the chunk.
inline double pape_estimate(MetricKind kind, const ScoredDataset& reference, const ChunkView& chunk,
                            std::uint64_t seed, const EstimatorConfig& cfg = {},
                            unsigned* flags = nullptr) {
    const DensityRatioModel dre =
        fit_dre(reference.features.view(), chunk.features(), seed, cfg.dre());
    if (dre.coverage_warning()) detail::set_flag(flags, flag::coverage);
    const std::vector<double> w = dre.estimate_weights(reference.features.view());
    const Calibrator cal = fit_weighted_calibrator(reference.scores, reference.label_span(), w);
    return detail::calibrated_estimate(kind, cal, chunk, flags);
}

// PAPE without reweighing: calibration under the reference distribution.
inline double cbpe_estimate(MetricKind kind, const ScoredDataset& reference, const ChunkView& chunk,
                            unsigned* flags = nullptr) {
    const Calibrator cal = fit_unweighted_calibrator(reference.scores, reference.label_span());
    return detail::calibrated_estimate(kind, cal, chunk, flags);
}

// --- importance weighting ---

inline double iw_estimate(MetricKind kind, const ScoredDataset& reference, const ChunkView& chunk,
                          std::uint64_t seed, const EstimatorConfig& cfg = {},
                          unsigned* flags = nullptr) {
    const DensityRatioModel dre =
        fit_dre(reference.features.view(), chunk.features(), seed, cfg.dre());
    if (dre.coverage_warning()) detail::set_flag(flags, flag::coverage);
    const std::vector<double> w = dre.estimate_weights(reference.features.view());
    double sum_w = 0.0, sum_w2 = 0.0;
    for (double wi : w) {
        sum_w += wi;
        sum_w2 += wi * wi;
    }
    if (sum_w * sum_w / sum_w2 < 10.0) detail::set_flag(flags, flag::low_effective_sample);
    return weighted_realized_metric(kind, reference.label_span(), reference.predictions,
                                    reference.scores, w, flags);
}

// --- average threshold confidence ---

struct AtcState {
    double threshold = 0.0;
    double reference_metric = 0.0;
};

// Threshold on max-confidence values such that the fraction of reference
// observations strictly above it reproduces the reference metric as closely as
// the empirical quantiles allow (lower threshold wins ties).
inline AtcState atc_fit(MetricKind kind, const ScoredDataset& reference) {
    AtcState st;
    st.reference_metric = realized_metric(kind, reference.label_span(), reference.predictions,
                                          reference.scores);
    std::vector<double> mc = max_confidence(reference.scores);
    std::sort(mc.begin(), mc.end());
    const double n = static_cast<double>(mc.size());

    double best_gap = std::numeric_limits<double>::infinity();
    double best_t = 0.0;
    auto consider = [&](double t, double frac_above) {
        const double gap = std::abs(frac_above - st.reference_metric);
        if (gap < best_gap) {
            best_gap = gap;
            best_t = t;
        }
    };
    consider(0.0, 1.0);  // everything above: MC values are always positive
    for (std::size_t k = 0; k < mc.size();) {
        std::size_t j = k;
        while (j < mc.size() && mc[j] == mc[k]) ++j;
        consider(mc[k], static_cast<double>(mc.size() - j) / n);
        k = j;
    }
    st.threshold = best_t;
    return st;
}

inline double atc_estimate(const AtcState& state, const ChunkView& chunk) {
    std::size_t above = 0;
    for (double s : chunk.scores())
        if (max_confidence(s) > state.threshold) ++above;
    return static_cast<double>(above) / static_cast<double>(chunk.size());
}

// --- difference of confidence ---

struct DocState {
    LinearModel line;
    double reference_mean_mc = 0.0;
    double reference_metric = 0.0;
    bool fallback = false;  // degenerate resampling; estimates fall back to the reference value
};

// Learns how the chunk-mean max-confidence maps to the metric by re-sampling
// the reference data with confidence-tilted probabilities.
inline DocState doc_fit(MetricKind kind, const ScoredDataset& reference, int n_resamples,
                        std::uint64_t seed, const EstimatorConfig& cfg = {}) {
    DocState st;
    const std::vector<double> mc = max_confidence(reference.scores);
    st.reference_mean_mc = detail::mean(mc);
    st.reference_metric = realized_metric(kind, reference.label_span(), reference.predictions,
                                          reference.scores);

    std::vector<double> mc_sorted = mc;
    std::sort(mc_sorted.begin(), mc_sorted.end());
    const double median = mc_sorted[mc_sorted.size() / 2];

    const std::size_t n = reference.n_rows();
    const std::size_t m = std::max<std::size_t>(cfg.doc_sample_size, 1);  // with replacement

    std::vector<double> conf_diff, perf_diff;
    std::vector<double> probs(n);
    std::vector<int> sub_labels(m), sub_preds(m);
    std::vector<double> sub_scores(m);
    for (int r = 0; r < n_resamples; ++r) {
        Rng rng(derive_seed(seed, static_cast<std::uint64_t>(r)));
        const double lambda = rng.uniform(-cfg.doc_lambda_range, cfg.doc_lambda_range);
        for (std::size_t i = 0; i < n; ++i) probs[i] = sigmoid(lambda * (mc[i] - median));
        const std::vector<double> cum = cumulative_sum(probs);

        double mc_sum = 0.0;
        for (std::size_t i = 0; i < m; ++i) {
            const std::size_t idx = rng.weighted_index(cum);
            sub_labels[i] = reference.label_span()[idx];
            sub_preds[i] = reference.predictions[idx];
            sub_scores[i] = reference.scores[idx];
            mc_sum += mc[idx];
        }
        try {
            const double metric = realized_metric(kind, sub_labels, sub_preds, sub_scores);
            conf_diff.push_back(mc_sum / static_cast<double>(m) - st.reference_mean_mc);
            perf_diff.push_back(metric - st.reference_metric);
        } catch (const UndefinedMetricError&) {
            // single-class resample; skip the pair
        }
    }

    if (conf_diff.size() < 2) {
        st.fallback = true;
        return st;
    }
    try {
        st.line = fit_line(conf_diff, perf_diff);
    } catch (const SingularFitError&) {
        st.fallback = true;
    }
    return st;
}

inline double doc_estimate(const DocState& state, const ChunkView& chunk,
                           unsigned* flags = nullptr) {
    if (state.fallback) {
        detail::set_flag(flags, flag::testset_fallback);
        return state.reference_metric;
    }
    const std::vector<double> mc = max_confidence(chunk.scores());
    const double diff = detail::mean(mc) - state.reference_mean_mc;
    return detail::clamp_metric(state.reference_metric + state.line.at(diff));
}

// --- modified reverse testing ---

struct RtState {
    double bias = 0.0;
    double reference_metric = 0.0;
};

namespace detail {

// Fits the reverse model on the chunk (predictions as targets) and scores the
// reference data with it.
inline double rt_raw_estimate(MetricKind kind, const ScoredDataset& reference,
                              const ChunkView& chunk, const EstimatorConfig& cfg,
                              unsigned* flags) {
    const ProbClassifier reverse =
        fit_prob_classifier(chunk.features(), chunk.predictions(), {}, cfg.logistic);
    const std::vector<double> rev_probs = reverse.predict_proba(reference.features.view());
    if (kind == MetricKind::auroc)
        return weighted_rank_auroc(rev_probs, reference.label_span());
    std::vector<int> rev_preds(rev_probs.size());
    for (std::size_t i = 0; i < rev_probs.size(); ++i) rev_preds[i] = rev_probs[i] >= 0.5 ? 1 : 0;
    return confusion_metric(kind, count_confusion(reference.label_span(), rev_preds), flags);
}

}  // namespace detail

// The additive correction is the mean gap between realized performance and the
// raw reverse-testing estimate over disjoint chunk-sized windows of reference.
inline RtState rtmod_fit(MetricKind kind, const ScoredDataset& reference,
                         std::uint64_t /*seed*/ = 0, const EstimatorConfig& cfg = {}) {
    RtState st;
    st.reference_metric = realized_metric(kind, reference.label_span(), reference.predictions,
                                          reference.scores);
    std::vector<Chunk> pseudo = split_chunks(reference, cfg.chunk_size, cfg.chunk_size);
    if (pseudo.empty()) pseudo.push_back(Chunk{0, reference.n_rows()});

    double sum = 0.0;
    std::size_t used = 0;
    for (const Chunk& pc : pseudo) {
        const ChunkView view(reference, pc);
        try {
            const double raw = detail::rt_raw_estimate(kind, reference, view, cfg, nullptr);
            const double realized = realized_metric(kind, view);
            sum += realized - raw;
            ++used;
        } catch (const Error&) {
            // degenerate window (single-class targets or undefined metric); skip
        }
    }
    st.bias = used > 0 ? sum / static_cast<double>(used) : 0.0;
    return st;
}

inline double rtmod_estimate(const RtState& state, MetricKind kind, const ScoredDataset& reference,
                             const ChunkView& chunk, const EstimatorConfig& cfg = {},
                             unsigned* flags = nullptr) {
    try {
        const double raw = detail::rt_raw_estimate(kind, reference, chunk, cfg, flags);
        return detail::clamp_metric(raw + state.bias);
    } catch (const DegenerateTargetError&) {
        detail::set_flag(flags, flag::testset_fallback);
        return state.reference_metric;
    }
}

// ---------------------------------------------------------------------------
// Estimator suite
// ---------------------------------------------------------------------------

struct ChunkEstimate {
    Method method;
    MetricKind kind;
    Estimate estimate;
    std::string error;  // non-empty when the estimator failed for this record
};

// All methods fitted against one reference dataset. Chunk estimation shares the
// per-chunk products (density-ratio fit, calibrations, reverse model) across
// methods and metric kinds. Immutable after fit; per-chunk calls are
// independent and may run concurrently.
class EstimatorSuite {
  public:
    static EstimatorSuite fit(ScoredDataset reference, std::vector<MetricKind> kinds,
                              const EstimatorConfig& cfg = {},
                              std::vector<Method> methods = all_methods()) {
        if (!reference.has_labels()) throw ValidationError("reference data requires labels");
        reference.validate();
        EstimatorSuite suite;
        suite.cfg_ = cfg;
        suite.kinds_ = std::move(kinds);
        suite.methods_ = std::move(methods);
        suite.ref_ = std::move(reference);
        for (MetricKind k : suite.kinds_) {
            suite.ref_metric_[k] = realized_metric(k, suite.ref_.label_span(),
                                                   suite.ref_.predictions, suite.ref_.scores);
            if (suite.fits(Method::atc)) suite.atc_[k] = atc_fit(k, suite.ref_);
            if (suite.fits(Method::doc))
                suite.doc_[k] =
                    doc_fit(k, suite.ref_, cfg.doc_resamples,
                            derive_seed(cfg.seed, 0xd0cULL + static_cast<int>(k)), cfg);
            if (suite.fits(Method::rt_mod)) suite.rt_[k] = rtmod_fit(k, suite.ref_, 0, cfg);
        }
        if (suite.fits(Method::cbpe))
            suite.cbpe_cal_ =
                fit_unweighted_calibrator(suite.ref_.scores, suite.ref_.label_span());
        return suite;
    }

    bool fits(Method m) const {
        return std::find(methods_.begin(), methods_.end(), m) != methods_.end();
    }

    const ScoredDataset& reference() const { return ref_; }
    const std::vector<MetricKind>& kinds() const { return kinds_; }
    const EstimatorConfig& config() const { return cfg_; }

    double reference_metric(MetricKind kind) const { return ref_metric_.at(kind); }

    // TEST SET baseline: the estimate is the reference value, constant across chunks.
    double testset_estimate(MetricKind kind) const { return ref_metric_.at(kind); }

    std::vector<ChunkEstimate> estimate_chunk(const ChunkView& chunk,
                                              std::span<const Method> methods) const {
        for (Method m : methods)
            if (!fits(m))
                throw ValidationError(std::string("method ") + to_string(m) +
                                      " was not fitted in this suite");
        const Context ctx = make_context(chunk, methods);
        std::vector<ChunkEstimate> out;
        out.reserve(methods.size() * kinds_.size());
        for (Method m : methods) {
            for (MetricKind k : kinds_) {
                ChunkEstimate rec;
                rec.method = m;
                rec.kind = k;
                try {
                    rec.estimate = estimate_one(m, k, chunk, ctx);
                } catch (const Error& e) {
                    rec.estimate = Estimate{std::numeric_limits<double>::quiet_NaN(),
                                            flag::estimation_error};
                    rec.error = e.what();
                }
                out.push_back(std::move(rec));
            }
        }
        return out;
    }

    Estimate estimate(Method method, MetricKind kind, const ChunkView& chunk) const {
        const Method methods[] = {method};
        for (ChunkEstimate& rec : estimate_chunk(chunk, methods))
            if (rec.kind == kind) {
                if (!rec.error.empty()) throw UndefinedMetricError(rec.error);
                return rec.estimate;
            }
        throw ValidationError("metric kind not fitted in this suite");
    }

  private:
    struct Context {
        std::optional<std::vector<double>> pape_probs;  // calibrated on the chunk
        std::optional<std::vector<double>> cbpe_probs;
        std::optional<std::vector<double>> iw_weights;  // on reference
        std::optional<std::vector<double>> rt_rev_probs;  // reverse model on reference
        unsigned pape_flags = 0;
        unsigned iw_flags = 0;
        bool rt_degenerate = false;
        std::string pape_error, iw_error;
    };

    Context make_context(const ChunkView& chunk, std::span<const Method> methods) const {
        Context ctx;
        const bool want_pape = std::find(methods.begin(), methods.end(), Method::pape) != methods.end();
        const bool want_iw = std::find(methods.begin(), methods.end(), Method::iw) != methods.end();
        const bool want_cbpe = std::find(methods.begin(), methods.end(), Method::cbpe) != methods.end();
        const bool want_rt = std::find(methods.begin(), methods.end(), Method::rt_mod) != methods.end();

        if (want_pape || want_iw) {
            try {
                const std::uint64_t seed = derive_seed(cfg_.seed, chunk.start());
                const DensityRatioModel dre =
                    fit_dre(ref_.features.view(), chunk.features(), seed, cfg_.dre());
                const std::vector<double> w = dre.estimate_weights(ref_.features.view());
                unsigned shared = dre.coverage_warning() ? flag::coverage : 0;
                if (want_iw) {
                    double sum_w = 0.0, sum_w2 = 0.0;
                    for (double wi : w) {
                        sum_w += wi;
                        sum_w2 += wi * wi;
                    }
                    ctx.iw_flags = shared;
                    if (sum_w * sum_w / sum_w2 < 10.0) ctx.iw_flags |= flag::low_effective_sample;
                    ctx.iw_weights = w;
                }
                if (want_pape) {
                    ctx.pape_flags = shared;
                    const Calibrator cal =
                        fit_weighted_calibrator(ref_.scores, ref_.label_span(), w);
                    ctx.pape_probs = cal.calibrate(chunk.scores());
                }
            } catch (const Error& e) {
                ctx.pape_error = ctx.iw_error = e.what();
            }
        }
        if (want_cbpe) ctx.cbpe_probs = cbpe_cal_.calibrate(chunk.scores());
        if (want_rt) {
            try {
                const ProbClassifier reverse =
                    fit_prob_classifier(chunk.features(), chunk.predictions(), {}, cfg_.logistic);
                ctx.rt_rev_probs = reverse.predict_proba(ref_.features.view());
            } catch (const DegenerateTargetError&) {
                ctx.rt_degenerate = true;
            }
        }
        return ctx;
    }

    Estimate estimate_one(Method method, MetricKind kind, const ChunkView& chunk,
                          const Context& ctx) const {
        Estimate est;
        est.flags = chunk.size() < 10 ? flag::small_chunk : flag::none;
        switch (method) {
            case Method::test_set:
                est.value = ref_metric_.at(kind);
                est.flags = flag::none;
                return est;
            case Method::atc:
                est.value = atc_estimate(atc_.at(kind), chunk);
                return est;
            case Method::doc:
                est.value = doc_estimate(doc_.at(kind), chunk, &est.flags);
                return est;
            case Method::rt_mod: {
                if (ctx.rt_degenerate) {
                    est.value = rt_.at(kind).reference_metric;
                    est.flags |= flag::testset_fallback;
                    return est;
                }
                double raw;
                if (kind == MetricKind::auroc) {
                    raw = weighted_rank_auroc(*ctx.rt_rev_probs, ref_.label_span());
                } else {
                    std::vector<int> rev_preds(ctx.rt_rev_probs->size());
                    for (std::size_t i = 0; i < rev_preds.size(); ++i)
                        rev_preds[i] = (*ctx.rt_rev_probs)[i] >= 0.5 ? 1 : 0;
                    raw = detail::confusion_metric(
                        kind, detail::count_confusion(ref_.label_span(), rev_preds), &est.flags);
                }
                est.value = detail::clamp_metric(raw + rt_.at(kind).bias);
                return est;
            }
            case Method::pape: {
                if (!ctx.pape_probs) throw UndefinedMetricError(ctx.pape_error);
                est.flags |= ctx.pape_flags;
                est.value = expectation_estimate(kind, *ctx.pape_probs, chunk.predictions(),
                                                 chunk.scores(), &est.flags);
                return est;
            }
            case Method::cbpe: {
                est.value = expectation_estimate(kind, *ctx.cbpe_probs, chunk.predictions(),
                                                 chunk.scores(), &est.flags);
                return est;
            }
            case Method::iw: {
                if (!ctx.iw_weights) throw UndefinedMetricError(ctx.iw_error);
                est.flags |= ctx.iw_flags;
                est.value = weighted_realized_metric(kind, ref_.label_span(), ref_.predictions,
                                                     ref_.scores, *ctx.iw_weights, &est.flags);
                return est;
            }
        }
        throw ValidationError("unknown method");
    }

    ScoredDataset ref_;
    EstimatorConfig cfg_;
    std::vector<MetricKind> kinds_;
    std::vector<Method> methods_;
    std::map<MetricKind, double> ref_metric_;
    Calibrator cbpe_cal_;
    std::map<MetricKind, AtcState> atc_;
    std::map<MetricKind, DocState> doc_;
    std::map<MetricKind, RtState> rt_;
};

}  // namespace perfest
