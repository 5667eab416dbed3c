#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <set>
#include <string>
#include <tuple>
#include <vector>

#include "fdi/calibration.hpp"
#include "fdi/csv.hpp"
#include "fdi/dataset.hpp"
#include "fdi/detection.hpp"
#include "fdi/isolation.hpp"
#include "fdi/ocsvm.hpp"
#include "fdi/stats.hpp"

namespace fdi {

enum class ModelKind { Ae, Vae, Helm, Ocsvm };

inline std::string to_string(ModelKind m) {
    switch (m) {
        case ModelKind::Ae: return "ae";
        case ModelKind::Vae: return "vae";
        case ModelKind::Helm: return "helm";
        case ModelKind::Ocsvm: return "ocsvm";
    }
    throw std::invalid_argument("unknown model kind");
}

inline ModelKind model_kind_from_string(const std::string& s) {
    if (s == "ae") return ModelKind::Ae;
    if (s == "vae") return ModelKind::Vae;
    if (s == "helm") return ModelKind::Helm;
    if (s == "ocsvm") return ModelKind::Ocsvm;
    throw std::invalid_argument("unknown model \"" + s + "\"");
}

struct ExperimentConfig {
    GenerationConfig generation;
    double validation_fraction = 0.06;
    std::vector<Variant> variants = {Variant::CMBD, Variant::Residual, Variant::Hybrid};
    std::vector<ModelKind> models = {ModelKind::Ae, ModelKind::Vae, ModelKind::Helm,
                                     ModelKind::Ocsvm};
    std::vector<std::uint64_t> seeds = {0, 1, 2, 3, 4, 5, 6, 7, 8, 9};
    OneClassConfig one_class;
    OcsvmConfig ocsvm;
    double nu_gamma = 1.5; // isolation safety margin, mirrors the detection gamma

    ExperimentConfig() {
        // Desk-scale training budget; the published settings remain the
        // library defaults in TrainConfig and are available via config.
        one_class.embed_train.epochs = 200;
        one_class.embed_train.batch_size = 256;
        one_class.head_train.epochs = 300;
        one_class.head_train.batch_size = 64;
    }

    void validate() const {
        generation.validate();
        if (!(validation_fraction > 0.0 && validation_fraction < 1.0))
            throw std::invalid_argument("validation_fraction must be in (0,1)");
        if (variants.empty() || models.empty() || seeds.empty())
            throw std::invalid_argument("variants, models and seeds must be nonempty");
        std::set<std::uint64_t> unique(seeds.begin(), seeds.end());
        if (unique.size() != seeds.size())
            throw std::invalid_argument("seeds must be distinct");
        if (!(nu_gamma > 0.0)) throw std::invalid_argument("nu_gamma must be positive");
    }
};

/// Percent agreement between true and predicted health labels.
inline double accuracy(const std::vector<int>& h_true, const std::vector<int>& h_hat) {
    if (h_true.size() != h_hat.size() || h_true.empty())
        throw std::invalid_argument("accuracy: need equal-length nonempty label lists");
    int agree = 0;
    for (size_t i = 0; i < h_true.size(); ++i) {
        if ((h_true[i] != 0 && h_true[i] != 1) || (h_hat[i] != 0 && h_hat[i] != 1))
            throw std::invalid_argument("accuracy: labels must be 0/1");
        if (h_true[i] == h_hat[i]) ++agree;
    }
    return 100.0 * agree / static_cast<double>(h_true.size());
}

/// Feature matrices per split for one variant, in normalized space.
struct VariantFeatures {
    Variant variant = Variant::CMBD;
    Normalizer normalizer;
    Matrix s_t, s_v, d_eval;        // S_T, S_V, D_U + D_T
    std::vector<int> eval_h;        // true labels on the evaluation rows
    std::vector<int> eval_fault;    // fault ids on the evaluation rows
    std::vector<size_t> eval_index; // bundle snapshot index per eval row
};

/// One calibrated dataset realization: snapshots plus the time-aligned
/// UKF trace.
struct CalibratedDataset {
    DatasetBundle bundle;
    CalibrationTrace trace;
};

inline CalibratedDataset build_dataset(const ExperimentConfig& cfg, const Plant& plant,
                                       std::uint64_t seed) {
    CalibratedDataset ds;
    ds.bundle = generate_dataset(cfg.generation, plant, seed);
    tag_validation_split(ds.bundle, cfg.validation_fraction, seed);
    ds.trace = calibrate_series(ds.bundle, plant, UkfState::initial(kNumHealthParams),
                                UkfConfig::defaults(plant));
    return ds;
}

/// Assembles, splits and normalizes one input-space variant. An optional
/// snapshot predicate restricts every split to a sub-envelope.
inline VariantFeatures build_features(
    const CalibratedDataset& ds, const Plant& plant, Variant variant,
    const std::function<bool(const Snapshot&)>& keep = nullptr) {
    VariantFeatures f;
    f.variant = variant;
    std::vector<Vector> st, sv, ev;
    for (size_t i = 0; i < ds.bundle.snapshots.size(); ++i) {
        const auto& snap = ds.bundle.snapshots[i];
        if (keep && !keep(snap)) continue;
        const Vector row = assemble_input(snap, &ds.trace.rows[i], variant, &plant);
        switch (snap.split) {
            case SplitTag::S_T: st.push_back(row); break;
            case SplitTag::S_V: sv.push_back(row); break;
            case SplitTag::D_U:
            case SplitTag::D_T:
                ev.push_back(row);
                f.eval_h.push_back(snap.h_s);
                f.eval_fault.push_back(snap.fault_id);
                f.eval_index.push_back(i);
                break;
        }
    }
    if (st.empty() || sv.empty())
        throw std::invalid_argument("build_features: empty training or validation split");
    auto pack = [&](const std::vector<Vector>& rows) {
        Matrix m(static_cast<Eigen::Index>(rows.size()), variant_dim(variant));
        for (size_t r = 0; r < rows.size(); ++r) m.row(static_cast<Eigen::Index>(r)) = rows[r];
        return m;
    };
    const Matrix raw_t = pack(st);
    f.normalizer = Normalizer::fit(raw_t);
    f.s_t = f.normalizer.apply(raw_t);
    f.s_v = f.normalizer.apply(pack(sv));
    f.d_eval = ev.empty() ? Matrix(0, variant_dim(variant)) : f.normalizer.apply(pack(ev));
    return f;
}

struct CellResult {
    Variant variant;
    ModelKind model;
    std::vector<double> run_accuracies; // one per seed, in seed order
    double mean_accuracy = 0.0;
    bool failed = false;
    std::string error;
};

struct IsolationSummary {
    Variant variant;
    ModelKind model;
    int fault_id = 0;
    int snapshots = 0;
    int top_is_target = 0;       // top-ranked column == injected theta column
    double mean_affected = 0.0;  // mean |{d > 1}| per snapshot
    int top_column = -1;         // majority top-ranked column
    std::map<int, int> top_counts; // working tally behind top_column
};

struct ResultsTable {
    std::vector<CellResult> cells;
    std::vector<IsolationSummary> isolation; // aggregated over seeds
};

/// Index of the injected fault parameter inside the hybrid feature vector.
inline int hybrid_theta_column(const ExperimentConfig& cfg) {
    return 3 + kNumSensors + kNumVirtualSensors + cfg.generation.fault_schedule.front().target_parameter;
}

namespace detail {

inline std::vector<int> detect_labels(const OneClassPipeline& p, const Matrix& x) {
    return detect(similarity(p, x));
}

} // namespace detail

/// Fits one (variant, model) cell on prepared features and scores D_U+D_T.
inline double run_cell(const VariantFeatures& f, ModelKind model, const OneClassConfig& occ,
                       const OcsvmConfig& scfg, std::uint64_t seed,
                       OneClassPipeline* fitted = nullptr) {
    std::vector<int> h_hat;
    if (model == ModelKind::Ocsvm) {
        const auto svm = ocsvm_fit(f.s_t, scfg);
        for (Eigen::Index i = 0; i < f.d_eval.rows(); ++i)
            h_hat.push_back(ocsvm_predict(svm, Vector(f.d_eval.row(i))));
    } else {
        const Embedding kind = model == ModelKind::Ae   ? Embedding::Ae
                               : model == ModelKind::Vae ? Embedding::Vae
                                                         : Embedding::Helm;
        auto p = fit_pipeline(f.s_t, kind, occ, seed);
        fit_threshold(p, f.s_v);
        h_hat = detail::detect_labels(p, f.d_eval);
        if (fitted) *fitted = std::move(p);
    }
    return accuracy(f.eval_h, h_hat);
}

/// Full grid: per seed, generate + calibrate once, then fit every
/// (variant, model) cell. A failing cell is recorded and skipped; the rest
/// of the grid proceeds.
inline ResultsTable run_experiment(const ExperimentConfig& cfg, const Plant& plant) {
    cfg.validate();
    ResultsTable table;
    for (Variant v : cfg.variants)
        for (ModelKind m : cfg.models) table.cells.push_back({v, m, {}, 0.0, false, ""});

    std::map<std::tuple<int, int, int>, IsolationSummary> iso_cells; // (variant, model, fault)

    for (std::uint64_t seed : cfg.seeds) {
        const auto ds = build_dataset(cfg, plant, seed);
        for (Variant v : cfg.variants) {
            const auto features = build_features(ds, plant, v);
            for (auto& cell : table.cells) {
                if (cell.variant != v || cell.failed) continue;
                try {
                    OneClassPipeline fitted;
                    const bool wants_isolation =
                        cell.model == ModelKind::Ae || cell.model == ModelKind::Vae;
                    const double acc = run_cell(features, cell.model, cfg.one_class, cfg.ocsvm,
                                                seed, wants_isolation ? &fitted : nullptr);
                    cell.run_accuracies.push_back(acc);

                    if (wants_isolation) {
                        const auto reconstruct = reconstructor_of(fitted);
                        const auto nu = fit_nu(reconstruct, features.s_v, 99.9, cfg.nu_gamma);
                        const Matrix d = isolation_scores(reconstruct, features.d_eval, nu);
                        for (Eigen::Index r = 0; r < d.rows(); ++r) {
                            const int fault = features.eval_fault[static_cast<size_t>(r)];
                            if (fault == 0) continue;
                            auto& s = iso_cells[{static_cast<int>(v),
                                                 static_cast<int>(cell.model), fault}];
                            s.variant = v;
                            s.model = cell.model;
                            s.fault_id = fault;
                            ++s.snapshots;
                            Eigen::Index top;
                            d.row(r).maxCoeff(&top);
                            if (v == Variant::Hybrid &&
                                static_cast<int>(top) == hybrid_theta_column(cfg))
                                ++s.top_is_target;
                            s.mean_affected += static_cast<double>(
                                rank_affected(Vector(d.row(r))).size());
                            ++s.top_counts[static_cast<int>(top)];
                        }
                    }
                } catch (const std::exception& e) {
                    cell.failed = true;
                    cell.error = e.what();
                }
            }
        }
    }

    for (auto& cell : table.cells)
        if (!cell.failed && !cell.run_accuracies.empty())
            cell.mean_accuracy = sample_mean(cell.run_accuracies);
    for (auto& [key, s] : iso_cells) {
        if (s.snapshots > 0) s.mean_affected /= s.snapshots;
        int best = 0;
        for (const auto& [col, count] : s.top_counts)
            if (count > best) { best = count; s.top_column = col; }
        table.isolation.push_back(s);
    }
    return table;
}

struct NoisePoint {
    double snr_db = 0.0; // +inf encoded as "inf" on output
    std::vector<double> run_accuracies;
    double mean_accuracy = 0.0;
    double ci95_half_width = 0.0;
};

/// Hybrid-variant accuracy under calibration noise: for each SNR the UKF
/// trace is contaminated, features rebuilt, and the model retrained and
/// rethresholded from scratch.
inline std::vector<NoisePoint> noise_sweep(const ExperimentConfig& cfg, const Plant& plant,
                                           const std::vector<double>& snr_list_db,
                                           ModelKind model = ModelKind::Ae) {
    cfg.validate();
    std::vector<NoisePoint> out;
    std::vector<CalibratedDataset> datasets;
    for (std::uint64_t seed : cfg.seeds) datasets.push_back(build_dataset(cfg, plant, seed));

    for (double snr : snr_list_db) {
        NoisePoint point;
        point.snr_db = snr;
        for (size_t k = 0; k < cfg.seeds.size(); ++k) {
            CalibratedDataset noisy;
            noisy.bundle = datasets[k].bundle;
            std::vector<const Snapshot*> ptrs;
            for (const auto& s : noisy.bundle.snapshots) ptrs.push_back(&s);
            noisy.trace = contaminate(datasets[k].trace, ptrs, plant, snr, cfg.seeds[k]);
            const auto features = build_features(noisy, plant, Variant::Hybrid);
            point.run_accuracies.push_back(
                run_cell(features, model, cfg.one_class, cfg.ocsvm, cfg.seeds[k]));
        }
        point.mean_accuracy = sample_mean(point.run_accuracies);
        point.ci95_half_width = ci95_half_width(point.run_accuracies);
        out.push_back(std::move(point));
    }
    return out;
}

struct EnvelopeResult {
    double baseline_accuracy = 0.0;   // unrestricted CM-only
    double restricted_accuracy = 0.0; // filtered envelope
    bool evaluable = true;            // false when the filter removes all faults
};

/// CM-only pipeline on an operating-envelope subset versus the full
/// envelope, same model kind and seeds.
inline EnvelopeResult envelope_restriction(
    const ExperimentConfig& cfg, const Plant& plant,
    const std::function<bool(const OperatingPoint&)>& predicate,
    ModelKind model = ModelKind::Ae) {
    cfg.validate();
    EnvelopeResult res;
    std::vector<double> base, restricted;
    for (std::uint64_t seed : cfg.seeds) {
        const auto ds = build_dataset(cfg, plant, seed);
        base.push_back(run_cell(build_features(ds, plant, Variant::CMBD), model, cfg.one_class,
                                cfg.ocsvm, seed));
        VariantFeatures filtered;
        try {
            filtered = build_features(ds, plant, Variant::CMBD,
                                      [&](const Snapshot& s) { return predicate(s.w); });
        } catch (const std::invalid_argument&) { // filter emptied a split
            res.evaluable = false;
            continue;
        }
        if (filtered.eval_h.empty() ||
            std::all_of(filtered.eval_h.begin(), filtered.eval_h.end(),
                        [](int h) { return h == 1; })) {
            res.evaluable = false;
            continue;
        }
        restricted.push_back(run_cell(filtered, model, cfg.one_class, cfg.ocsvm, seed));
    }
    res.baseline_accuracy = sample_mean(base);
    if (restricted.empty()) res.evaluable = false;
    if (res.evaluable) res.restricted_accuracy = sample_mean(restricted);
    return res;
}

/// Latent features for every row, with labels, as a plot-ready CSV.
inline void export_latent(const OneClassPipeline& pipeline, const Matrix& features,
                          const std::vector<SplitTag>& splits, const std::vector<int>& h_s,
                          const std::vector<int>& fault_ids, const std::string& path) {
    const auto n = static_cast<size_t>(features.rows());
    if (splits.size() != n || h_s.size() != n || fault_ids.size() != n)
        throw std::invalid_argument("export_latent: label lengths must match feature rows");
    const Matrix z = pipeline.embed(features);
    csv::Writer out(path);
    std::vector<std::string> header;
    for (Eigen::Index c = 0; c < z.cols(); ++c) header.push_back("z" + std::to_string(c + 1));
    header.insert(header.end(), {"split_tag", "h_s", "fault_id"});
    out.header(header);
    std::vector<std::string> row;
    for (size_t r = 0; r < n; ++r) {
        row.clear();
        for (Eigen::Index c = 0; c < z.cols(); ++c)
            row.push_back(csv::format(z(static_cast<Eigen::Index>(r), c)));
        row.push_back(to_string(splits[r]));
        row.push_back(std::to_string(h_s[r]));
        row.push_back(std::to_string(fault_ids[r]));
        out.line(row);
    }
}

inline void write_results_csv(const ResultsTable& table, const std::string& path) {
    csv::Writer out(path);
    out.header({"variant", "model", "run", "accuracy", "status", "error"});
    std::vector<std::string> row;
    for (const auto& cell : table.cells) {
        for (size_t r = 0; r < cell.run_accuracies.size(); ++r) {
            row = {to_string(cell.variant), to_string(cell.model), std::to_string(r),
                   csv::format(cell.run_accuracies[r]), "ok", ""};
            out.line(row);
        }
        if (cell.failed) {
            row = {to_string(cell.variant), to_string(cell.model), "-", "", "failed", cell.error};
            out.line(row);
        }
    }
}

inline void write_summary_csv(const ResultsTable& table, const std::string& path) {
    csv::Writer out(path);
    out.header({"variant", "model", "mean_accuracy", "runs", "status"});
    std::vector<std::string> row;
    for (const auto& cell : table.cells) {
        row = {to_string(cell.variant), to_string(cell.model),
               cell.failed ? "" : csv::format(cell.mean_accuracy),
               std::to_string(cell.run_accuracies.size()), cell.failed ? "failed" : "ok"};
        out.line(row);
    }
}

inline void write_isolation_csv(const ResultsTable& table, const std::string& path) {
    csv::Writer out(path);
    out.header({"variant", "model", "fault_id", "snapshots", "top_is_target_fraction",
                "mean_affected", "majority_top_column"});
    std::vector<std::string> row;
    for (const auto& s : table.isolation) {
        row = {to_string(s.variant),
               to_string(s.model),
               std::to_string(s.fault_id),
               std::to_string(s.snapshots),
               csv::format(s.snapshots > 0
                               ? static_cast<double>(s.top_is_target) / s.snapshots
                               : 0.0),
               csv::format(s.mean_affected),
               std::to_string(s.top_column)};
        out.line(row);
    }
}

inline void write_noise_csv(const std::vector<NoisePoint>& points, const std::string& path) {
    csv::Writer out(path);
    out.header({"snr_db", "mean_accuracy", "ci95_half_width", "runs"});
    std::vector<std::string> row;
    for (const auto& p : points) {
        row = {std::isinf(p.snr_db) ? "inf" : csv::format(p.snr_db),
               csv::format(p.mean_accuracy), csv::format(p.ci95_half_width),
               std::to_string(p.run_accuracies.size())};
        out.line(row);
    }
}

} // namespace fdi
