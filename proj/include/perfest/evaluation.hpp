#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "perfest/dataset.hpp"
#include "perfest/errors.hpp"
#include "perfest/estimators.hpp"
#include "perfest/rng.hpp"

namespace perfest {

// One (dataset, monitored model) pair: labeled reference and labeled production
// periods plus the per-metric sampling standard errors used for scaling.
struct EvaluationCase {
    std::string id;
    ScoredDataset reference;
    ScoredDataset production;
    std::map<MetricKind, double> se;
    std::size_t chunk_count = 0;
};

// Standard deviation of the realized metric over bootstrap resamples of the
// evaluation chunk size, drawn with replacement from reference. The resample
// index stream depends only on (seed, resample number), so every metric kind
// sees the same resamples.
inline double bootstrap_se(const ScoredDataset& reference, MetricKind kind,
                           std::size_t sample_size = 2000, int n_boot = 500,
                           std::uint64_t seed = 0) {
    if (!reference.has_labels()) throw ValidationError("bootstrap_se needs labels");
    if (sample_size < 1) throw ValidationError("sample_size must be >= 1");
    if (n_boot < 2) throw ValidationError("n_boot must be >= 2");

    const std::size_t n = reference.n_rows();
    std::vector<int> labels(sample_size), preds(sample_size);
    std::vector<double> scores(sample_size);
    std::vector<double> values;
    values.reserve(static_cast<std::size_t>(n_boot));
    int undefined = 0;
    for (int b = 0; b < n_boot; ++b) {
        Rng rng(derive_seed(seed, static_cast<std::uint64_t>(b)));
        for (std::size_t i = 0; i < sample_size; ++i) {
            const std::size_t idx = rng.index(n);
            labels[i] = reference.label_span()[idx];
            preds[i] = reference.predictions[idx];
            scores[i] = reference.scores[idx];
        }
        try {
            values.push_back(realized_metric(kind, labels, preds, scores));
        } catch (const UndefinedMetricError&) {
            ++undefined;
        }
    }
    if (undefined > n_boot / 10)
        throw SeUndefinedError(std::string("metric ") + to_string(kind) + " undefined on " +
                               std::to_string(undefined) + " of " + std::to_string(n_boot) +
                               " resamples");

    double mean = 0.0;
    for (double v : values) mean += v;
    mean /= static_cast<double>(values.size());
    double var = 0.0;
    for (double v : values) var += (v - mean) * (v - mean);
    var /= static_cast<double>(values.size());  // population form
    return std::sqrt(var);
}

struct FilterDecision {
    bool accepted = false;
    std::string reason;  // empty when accepted
};

// Case admission rules: enough reference data for three chunks, a monitored
// model that beats random, and a non-degenerate sampling distribution.
inline FilterDecision filter_case(const EvaluationCase& c, std::size_t chunk_size = 2000) {
    if (c.reference.n_rows() < 3 * chunk_size)
        return {false, "reference has " + std::to_string(c.reference.n_rows()) +
                           " observations, fewer than 3 chunks of " + std::to_string(chunk_size)};
    double auroc;
    try {
        auroc = realized_metric(MetricKind::auroc, c.reference.label_span(),
                                c.reference.predictions, c.reference.scores);
    } catch (const UndefinedMetricError&) {
        return {false, "reference AUROC undefined (single-class labels)"};
    }
    if (auroc < 0.5) return {false, "reference AUROC " + std::to_string(auroc) + " below 0.5"};
    const double f1 = realized_metric(MetricKind::f1, c.reference.label_span(),
                                      c.reference.predictions, c.reference.scores);
    if (f1 == 0.0) return {false, "reference F1 equals 0"};
    for (const auto& [kind, se] : c.se) {
        if (se == 0.0)
            return {false, std::string("standard error for ") + to_string(kind) + " is 0"};
    }
    return {true, ""};
}

// One production chunk evaluated for one metric kind. Carries the owning
// case's standard error and reference value so aggregate metrics need no join.
struct EstimationPoint {
    std::string case_id;
    std::size_t chunk_index = 0;
    MetricKind kind = MetricKind::accuracy;
    double realized = 0.0;
    double reference_value = 0.0;
    double se = 0.0;
    std::map<Method, double> estimates;
};

namespace detail {

template <typename Fn>
void for_each_point(std::span<const EstimationPoint> points, Method method, MetricKind kind,
                    Fn&& fn) {
    for (const EstimationPoint& p : points) {
        if (p.kind != kind) continue;
        const auto it = p.estimates.find(method);
        if (it == p.estimates.end()) continue;
        if (!(p.se > 0.0)) throw ValidationError("estimation point has non-positive SE");
        fn(p, it->second);
    }
}

}  // namespace detail

// Mean absolute estimation error in units of the per-case standard error.
inline double maste(std::span<const EstimationPoint> points, Method method, MetricKind kind) {
    double sum = 0.0;
    std::size_t n = 0;
    detail::for_each_point(points, method, kind, [&](const EstimationPoint& p, double est) {
        sum += std::abs(p.realized - est) / p.se;
        ++n;
    });
    if (n == 0) throw UndefinedMetricError("no estimation points for the requested method/metric");
    return sum / static_cast<double>(n);
}

// Root mean squared counterpart; always >= maste on the same points.
inline double rmsste(std::span<const EstimationPoint> points, Method method, MetricKind kind) {
    double sum = 0.0;
    std::size_t n = 0;
    detail::for_each_point(points, method, kind, [&](const EstimationPoint& p, double est) {
        const double scaled = (p.realized - est) / p.se;
        sum += scaled * scaled;
        ++n;
    });
    if (n == 0) throw UndefinedMetricError("no estimation points for the requested method/metric");
    return std::sqrt(sum / static_cast<double>(n));
}

struct RollingBucket {
    double center = 0.0;  // in SE units; bucket k covers [k*w, (k+1)*w)
    double maste = 0.0;
    std::size_t count = 0;
};

// MASTE bucketed by the magnitude of the realized performance change
// |realized - reference| / SE. Buckets partition [0, inf) into windows of
// bucket_width_se; empty buckets are omitted.
inline std::vector<RollingBucket> rolling_maste(std::span<const EstimationPoint> points,
                                                Method method, MetricKind kind,
                                                double bucket_width_se = 2.0) {
    if (!(bucket_width_se > 0.0)) throw ValidationError("bucket width must be positive");
    std::map<std::size_t, std::pair<double, std::size_t>> acc;  // bucket -> (sum, count)
    detail::for_each_point(points, method, kind, [&](const EstimationPoint& p, double est) {
        const double change = std::abs(p.realized - p.reference_value) / p.se;
        const auto bucket = static_cast<std::size_t>(change / bucket_width_se);
        auto& [sum, count] = acc[bucket];
        sum += std::abs(p.realized - est) / p.se;
        ++count;
    });
    std::vector<RollingBucket> out;
    out.reserve(acc.size());
    for (const auto& [bucket, sc] : acc) {
        RollingBucket b;
        b.center = (static_cast<double>(bucket) + 0.5) * bucket_width_se;
        b.maste = sc.first / static_cast<double>(sc.second);
        b.count = sc.second;
        out.push_back(b);
    }
    return out;
}

// Builds the per-chunk estimation points for one case with a fitted suite.
inline std::vector<EstimationPoint> collect_points(const EvaluationCase& c,
                                                   const EstimatorSuite& suite,
                                                   std::span<const Method> methods,
                                                   std::span<const Chunk> chunks) {
    if (!c.production.has_labels())
        throw ValidationError("evaluation requires labeled production data");
    std::vector<EstimationPoint> points;
    for (std::size_t j = 0; j < chunks.size(); ++j) {
        const ChunkView view(c.production, chunks[j]);
        const std::vector<ChunkEstimate> records = suite.estimate_chunk(view, methods);
        for (MetricKind kind : suite.kinds()) {
            EstimationPoint p;
            p.case_id = c.id;
            p.chunk_index = j;
            p.kind = kind;
            try {
                p.realized = realized_metric(kind, view);
            } catch (const UndefinedMetricError&) {
                continue;  // chunk where the realized metric does not exist
            }
            p.reference_value = suite.reference_metric(kind);
            const auto it = c.se.find(kind);
            p.se = it != c.se.end() ? it->second : 0.0;
            bool complete = true;
            for (const ChunkEstimate& rec : records) {
                if (rec.kind != kind) continue;
                if (!rec.error.empty() || !std::isfinite(rec.estimate.value)) {
                    complete = false;
                    continue;
                }
                p.estimates[rec.method] = rec.estimate.value;
            }
            if (complete || !p.estimates.empty()) points.push_back(std::move(p));
        }
    }
    return points;
}

struct SweepRow {
    std::size_t size = 0;
    std::size_t n_chunks = 0;
    bool skipped = false;
    std::string reason;
    std::map<Method, double> mae;
};

// Re-chunks the production stream at several sizes and reports plain mean
// absolute error per method (single-case protocol).
inline std::vector<SweepRow> sample_size_sweep(const EvaluationCase& c, MetricKind kind,
                                               std::span<const std::size_t> sizes,
                                               std::size_t step, std::span<const Method> methods,
                                               std::uint64_t seed,
                                               const EstimatorConfig& base_cfg = {}) {
    if (!c.production.has_labels())
        throw ValidationError("sample_size_sweep requires labeled production data");
    std::vector<SweepRow> rows;
    for (std::size_t size : sizes) {
        SweepRow row;
        row.size = size;
        const std::vector<Chunk> chunks = split_chunks(c.production, size, step);
        if (chunks.size() < 2) {
            row.skipped = true;
            row.reason = "production stream yields fewer than 2 chunks of size " +
                         std::to_string(size);
            rows.push_back(std::move(row));
            continue;
        }
        EstimatorConfig cfg = base_cfg;
        cfg.seed = seed;
        EstimatorSuite suite = EstimatorSuite::fit(
            c.reference, {kind}, cfg, std::vector<Method>(methods.begin(), methods.end()));

        std::map<Method, double> abs_err;
        std::map<Method, std::size_t> counts;
        for (const Chunk& chunk : chunks) {
            const ChunkView view(c.production, chunk);
            double realized;
            try {
                realized = realized_metric(kind, view);
            } catch (const UndefinedMetricError&) {
                continue;
            }
            for (const ChunkEstimate& rec : suite.estimate_chunk(view, methods)) {
                if (rec.kind != kind || !rec.error.empty() || !std::isfinite(rec.estimate.value))
                    continue;
                abs_err[rec.method] += std::abs(realized - rec.estimate.value);
                ++counts[rec.method];
            }
        }
        row.n_chunks = chunks.size();
        for (const auto& [m, total] : abs_err)
            if (counts[m] > 0) row.mae[m] = total / static_cast<double>(counts[m]);
        rows.push_back(std::move(row));
    }
    return rows;
}

// Aggregate results for one or more cases: scaled errors per method and metric,
// rolling buckets, and the filtering audit trail.
struct MethodMetricScore {
    Method method;
    MetricKind kind;
    double maste = 0.0;
    double rmsste = 0.0;
    std::size_t n_points = 0;
};

struct BucketRow {
    Method method;
    MetricKind kind;
    RollingBucket bucket;
};

struct EvaluationReport {
    std::vector<MethodMetricScore> scores;
    std::vector<BucketRow> buckets;
    std::vector<EstimationPoint> points;
    std::vector<std::string> audit;
};

inline EvaluationReport aggregate_report(std::span<const EstimationPoint> points,
                                         std::span<const Method> methods,
                                         std::span<const MetricKind> kinds,
                                         double bucket_width_se = 2.0) {
    EvaluationReport report;
    report.points.assign(points.begin(), points.end());
    for (Method m : methods) {
        for (MetricKind k : kinds) {
            std::size_t n = 0;
            detail::for_each_point(points, m, k, [&](const EstimationPoint&, double) { ++n; });
            if (n == 0) continue;
            MethodMetricScore score;
            score.method = m;
            score.kind = k;
            score.maste = maste(points, m, k);
            score.rmsste = rmsste(points, m, k);
            score.n_points = n;
            report.scores.push_back(score);
            for (const RollingBucket& b : rolling_maste(points, m, k, bucket_width_se))
                report.buckets.push_back(BucketRow{m, k, b});
        }
    }
    return report;
}

}  // namespace perfest
