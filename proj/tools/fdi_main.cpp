// fdi: synthetic gas-path diagnostics toolkit.
//
// Verbs: plant baseline | generate | calibrate | train | detect | isolate |
//        evaluate | noise-sweep | envelope | export-latent
// Exit codes: 0 success, 2 configuration/input error, 3 numeric or
// optimization failure.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "fdi/calibration.hpp"
#include "fdi/dataset.hpp"
#include "fdi/detection.hpp"
#include "fdi/harness.hpp"
#include "fdi/isolation.hpp"
#include "fdi/ocsvm.hpp"
#include "fdi/plant.hpp"
#include "fdi/serialize.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct ToolConfig {
    fdi::PlantConfig plant;
    fdi::ExperimentConfig experiment;
    std::vector<double> noise_snr_db = {std::numeric_limits<double>::infinity(), 40.0, 30.0,
                                        20.0, 10.0};
    double envelope_min_altitude_ft = 25000.0;
};

fdi::nn::TrainConfig train_config_from_json(const json& j, fdi::nn::TrainConfig base) {
    base.learning_rate = j.value("learning_rate", base.learning_rate);
    base.batch_size = j.value("batch_size", base.batch_size);
    base.epochs = j.value("epochs", base.epochs);
    return base;
}

ToolConfig load_config(const std::string& path) {
    ToolConfig cfg;
    if (path.empty()) return cfg;
    std::ifstream in(path);
    if (!in) throw std::invalid_argument("cannot open config file \"" + path + "\"");
    json j;
    in >> j;

    if (j.contains("plant")) cfg.plant = j.at("plant").get<fdi::PlantConfig>();
    if (j.contains("generation")) {
        const auto& g = j.at("generation");
        auto& gen = cfg.experiment.generation;
        gen.healthy_flights = g.value("healthy_flights", gen.healthy_flights);
        gen.snapshots_per_flight = g.value("snapshots_per_flight", gen.snapshots_per_flight);
        gen.du_healthy_snapshots = g.value("du_healthy_snapshots", gen.du_healthy_snapshots);
        gen.healthy_theta_sigma = g.value("healthy_theta_sigma", gen.healthy_theta_sigma);
        gen.min_altitude_ft = g.value("min_altitude_ft", gen.min_altitude_ft);
    }
    if (j.contains("experiment")) {
        const auto& e = j.at("experiment");
        auto& ex = cfg.experiment;
        ex.validation_fraction = e.value("validation_fraction", ex.validation_fraction);
        ex.nu_gamma = e.value("nu_gamma", ex.nu_gamma);
        if (e.contains("variants")) {
            ex.variants.clear();
            for (const auto& v : e.at("variants"))
                ex.variants.push_back(fdi::variant_from_string(v.get<std::string>()));
        }
        if (e.contains("models")) {
            ex.models.clear();
            for (const auto& m : e.at("models"))
                ex.models.push_back(fdi::model_kind_from_string(m.get<std::string>()));
        }
        if (e.contains("seeds")) ex.seeds = e.at("seeds").get<std::vector<std::uint64_t>>();
    }
    if (j.contains("training")) {
        const auto& t = j.at("training");
        auto& oc = cfg.experiment.one_class;
        if (t.contains("embedding"))
            oc.embed_train = train_config_from_json(t.at("embedding"), oc.embed_train);
        if (t.contains("head")) oc.head_train = train_config_from_json(t.at("head"), oc.head_train);
        oc.gamma = t.value("gamma", oc.gamma);
        oc.percentile = t.value("percentile", oc.percentile);
    }
    if (j.contains("ocsvm")) {
        const auto& s = j.at("ocsvm");
        cfg.experiment.ocsvm.nu = s.value("nu", cfg.experiment.ocsvm.nu);
        cfg.experiment.ocsvm.gamma_rbf = s.value("gamma_rbf", cfg.experiment.ocsvm.gamma_rbf);
        cfg.experiment.ocsvm.tol = s.value("tol", cfg.experiment.ocsvm.tol);
    }
    if (j.contains("noise")) {
        cfg.noise_snr_db.clear();
        for (const auto& v : j.at("noise").at("snr_db")) {
            if (v.is_string() && v.get<std::string>() == "inf")
                cfg.noise_snr_db.push_back(std::numeric_limits<double>::infinity());
            else
                cfg.noise_snr_db.push_back(v.get<double>());
        }
    }
    if (j.contains("envelope"))
        cfg.envelope_min_altitude_ft =
            j.at("envelope").value("min_altitude_ft", cfg.envelope_min_altitude_ft);
    return cfg;
}

std::vector<std::string> feature_csv_header(fdi::Variant variant) {
    std::vector<std::string> h = {"key", "split_tag", "h_s", "fault_id"};
    for (const auto& c : fdi::variant_columns(variant)) h.push_back(c);
    return h;
}

/// Raw (unnormalized) per-snapshot feature rows with labels.
void write_features_csv(const fdi::CalibratedDataset& ds, const fdi::Plant& plant,
                        fdi::Variant variant, const std::string& path) {
    fdi::csv::Writer out(path);
    out.header(feature_csv_header(variant));
    std::vector<std::string> row;
    for (size_t i = 0; i < ds.bundle.snapshots.size(); ++i) {
        const auto& snap = ds.bundle.snapshots[i];
        const fdi::Vector v = fdi::assemble_input(snap, &ds.trace.rows[i], variant, &plant);
        row = {std::to_string(i), fdi::to_string(snap.split), std::to_string(snap.h_s),
               std::to_string(snap.fault_id)};
        for (Eigen::Index k = 0; k < v.size(); ++k) row.push_back(fdi::csv::format(v[k]));
        out.line(row);
    }
}

struct FeatureFile {
    std::vector<std::string> keys;
    std::vector<fdi::SplitTag> splits;
    std::vector<int> h_s, fault_ids;
    fdi::Matrix features; // raw space
    std::vector<std::string> columns;
};

FeatureFile read_features_csv(const std::string& path, fdi::Variant variant) {
    const auto t = fdi::csv::read(path);
    const auto expected = feature_csv_header(variant);
    if (t.header != expected)
        throw std::invalid_argument("feature file \"" + path +
                                    "\" does not match the expected " +
                                    fdi::to_string(variant) + " layout");
    FeatureFile f;
    f.columns.assign(expected.begin() + 4, expected.end());
    const int dim = fdi::variant_dim(variant);
    f.features.resize(static_cast<Eigen::Index>(t.rows.size()), dim);
    int lineno = 1;
    for (size_t r = 0; r < t.rows.size(); ++r) {
        ++lineno;
        const auto& row = t.rows[r];
        f.keys.push_back(row[0]);
        f.splits.push_back(fdi::split_tag_from_string(row[1]));
        f.h_s.push_back(static_cast<int>(fdi::csv::parse_double(row[2], lineno)));
        f.fault_ids.push_back(static_cast<int>(fdi::csv::parse_double(row[3], lineno)));
        for (int c = 0; c < dim; ++c)
            f.features(static_cast<Eigen::Index>(r), c) =
                fdi::csv::parse_double(row[4 + c], lineno);
    }
    return f;
}

fdi::CalibratedDataset load_calibrated(const std::string& dir) {
    fdi::CalibratedDataset ds;
    ds.bundle = fdi::read_csv((fs::path(dir) / "snapshots.csv").string());
    const auto t = fdi::csv::read((fs::path(dir) / "calibration.csv").string());
    if (t.rows.size() != ds.bundle.snapshots.size())
        throw std::invalid_argument("snapshots.csv and calibration.csv row counts differ");
    const auto header = fdi::calibration_csv_header();
    if (t.header != header)
        throw std::invalid_argument("calibration.csv does not match the expected layout");
    int lineno = 1;
    for (const auto& row : t.rows) {
        ++lineno;
        fdi::CalibrationRow r;
        int c = 2; // flight_cycle, index_in_flight are bookkeeping
        for (int i = 0; i < fdi::kNumHealthParams; ++i)
            r.theta_hat[i] = fdi::csv::parse_double(row[c++], lineno);
        for (int i = 0; i < fdi::kNumSensors; ++i)
            r.xs_hat[i] = fdi::csv::parse_double(row[c++], lineno);
        for (int i = 0; i < fdi::kNumVirtualSensors; ++i)
            r.xv_hat[i] = fdi::csv::parse_double(row[c++], lineno);
        r.innovation_norm = fdi::csv::parse_double(row[c++], lineno);
        ds.trace.rows.push_back(std::move(r));
    }
    return ds;
}

void write_calibration_csv(const fdi::DatasetBundle& bundle, const fdi::CalibrationTrace& trace,
                           const std::string& path) {
    fdi::csv::Writer out(path);
    out.header(fdi::calibration_csv_header());
    std::vector<std::string> row;
    for (size_t i = 0; i < trace.rows.size(); ++i) {
        const auto& r = trace.rows[i];
        row = {std::to_string(bundle.snapshots[i].flight_cycle),
               std::to_string(bundle.snapshots[i].index_in_flight)};
        for (int k = 0; k < fdi::kNumHealthParams; ++k) row.push_back(fdi::csv::format(r.theta_hat[k]));
        for (int k = 0; k < fdi::kNumSensors; ++k) row.push_back(fdi::csv::format(r.xs_hat[k]));
        for (int k = 0; k < fdi::kNumVirtualSensors; ++k) row.push_back(fdi::csv::format(r.xv_hat[k]));
        row.push_back(fdi::csv::format(r.innovation_norm));
        out.line(row);
    }
}

int run(int argc, char** argv) {
    CLI::App app{"calibration-based hybrid fault detection and isolation toolkit"};
    app.require_subcommand(1);

    std::string config_path, in_path, out_path, pipeline_path;
    std::string variant_name = "hybrid", model_name = "ae";
    std::uint64_t seed = 0;

    auto add_common = [&](CLI::App* cmd) {
        cmd->add_option("--config", config_path, "JSON configuration file");
        cmd->add_option("--seed", seed, "base RNG seed");
    };

    // plant baseline
    auto* plant_cmd = app.add_subcommand("plant", "surrogate plant utilities");
    auto* baseline = plant_cmd->add_subcommand("baseline", "dump the nominal grid");
    add_common(baseline);
    baseline->add_option("--out", out_path, "output CSV path")->required();

    auto* generate = app.add_subcommand("generate", "generate the synthetic dataset");
    add_common(generate);
    generate->add_option("--out", out_path, "output directory")->required();

    auto* calibrate = app.add_subcommand("calibrate", "run the UKF over a snapshot series");
    add_common(calibrate);
    calibrate->add_option("--in", in_path, "snapshots.csv path")->required();
    calibrate->add_option("--out", out_path, "calibration.csv path")->required();

    auto* train = app.add_subcommand("train", "fit one (variant, model) pipeline");
    add_common(train);
    train->add_option("--in", in_path, "directory with snapshots.csv and calibration.csv")
        ->required();
    train->add_option("--out", out_path, "output directory")->required();
    train->add_option("--variant", variant_name, "cm|residual|hybrid");
    train->add_option("--model", model_name, "ae|vae|helm|ocsvm");

    auto* detect_cmd = app.add_subcommand("detect", "score a feature file");
    detect_cmd->add_option("--pipeline", pipeline_path, "model JSON")->required();
    detect_cmd->add_option("--in", in_path, "features CSV")->required();
    detect_cmd->add_option("--out", out_path, "report CSV")->required();

    auto* isolate = app.add_subcommand("isolate", "per-signal isolation scores");
    isolate->add_option("--pipeline", pipeline_path, "model JSON")->required();
    isolate->add_option("--in", in_path, "features CSV")->required();
    isolate->add_option("--out", out_path, "isolation CSV")->required();

    auto* evaluate = app.add_subcommand("evaluate", "run the full model x variant grid");
    add_common(evaluate);
    evaluate->add_option("--out", out_path, "output directory")->required();

    auto* noise = app.add_subcommand("noise-sweep", "hybrid accuracy vs calibration SNR");
    add_common(noise);
    noise->add_option("--out", out_path, "output directory")->required();
    noise->add_option("--model", model_name, "ae|vae|helm");

    auto* envelope = app.add_subcommand("envelope", "restricted-envelope comparison");
    add_common(envelope);
    envelope->add_option("--out", out_path, "output directory")->required();

    auto* latent = app.add_subcommand("export-latent", "dump embedding features");
    latent->add_option("--pipeline", pipeline_path, "model JSON")->required();
    latent->add_option("--in", in_path, "features CSV")->required();
    latent->add_option("--out", out_path, "latent CSV")->required();

    CLI11_PARSE(app, argc, argv);

    const ToolConfig cfg = load_config(config_path);
    const fdi::Plant plant{cfg.plant};

    if (baseline->parsed()) {
        fdi::csv::Writer out(out_path);
        std::vector<std::string> header = {"alt", "XM", "TRA"};
        for (const auto& n : fdi::SensorVector::names()) header.push_back(n);
        for (const auto& n : fdi::VirtualSensorVector::names()) header.push_back(n);
        out.header(header);
        std::vector<std::string> row;
        for (double alt : {0.0, 10000.0, 20000.0, 30000.0, 40000.0})
            for (double mach : {0.0, 0.3, 0.6, 0.9})
                for (double tra : {20.0, 50.0, 75.0, 100.0}) {
                    const auto sim = plant.simulate({alt, mach, tra}, fdi::HealthParameters{});
                    row = {fdi::csv::format(alt), fdi::csv::format(mach), fdi::csv::format(tra)};
                    for (int i = 0; i < fdi::kNumSensors; ++i)
                        row.push_back(fdi::csv::format(sim.x_s.values[i]));
                    for (int i = 0; i < fdi::kNumVirtualSensors; ++i)
                        row.push_back(fdi::csv::format(sim.x_v.values[i]));
                    out.line(row);
                }
        return 0;
    }

    if (generate->parsed()) {
        fs::create_directories(out_path);
        auto bundle = fdi::generate_dataset(cfg.experiment.generation, plant, seed);
        fdi::tag_validation_split(bundle, cfg.experiment.validation_fraction, seed);
        fdi::write_csv(bundle, (fs::path(out_path) / "snapshots.csv").string());
        return 0;
    }

    if (calibrate->parsed()) {
        const auto bundle = fdi::read_csv(in_path);
        const auto trace = fdi::calibrate_series(bundle, plant,
                                                 fdi::UkfState::initial(fdi::kNumHealthParams),
                                                 fdi::UkfConfig::defaults(plant));
        write_calibration_csv(bundle, trace, out_path);
        return 0;
    }

    if (train->parsed()) {
        const auto variant = fdi::variant_from_string(variant_name);
        const auto ds = load_calibrated(in_path);
        const auto features = fdi::build_features(ds, plant, variant);
        fs::create_directories(out_path);
        write_features_csv(ds, plant, variant,
                           (fs::path(out_path) / ("features_" + variant_name + ".csv")).string());

        fdi::ModelBundle bundle;
        bundle.variant = variant;
        bundle.normalizer = features.normalizer;
        if (model_name == "ocsvm") {
            bundle.is_ocsvm = true;
            bundle.svm = fdi::ocsvm_fit(features.s_t, cfg.experiment.ocsvm);
        } else {
            const auto kind = fdi::embedding_from_string(model_name);
            bundle.pipeline = fdi::fit_pipeline(features.s_t, kind, cfg.experiment.one_class, seed);
            fdi::fit_threshold(bundle.pipeline, features.s_v);
            if (kind == fdi::Embedding::Ae || kind == fdi::Embedding::Vae)
                bundle.isolation = fdi::fit_nu(fdi::reconstructor_of(bundle.pipeline),
                                               features.s_v, 99.9, cfg.experiment.nu_gamma);
        }
        fdi::save_model(
            bundle,
            (fs::path(out_path) / ("model_" + variant_name + "_" + model_name + ".json")).string());
        return 0;
    }

    if (detect_cmd->parsed()) {
        const auto model = fdi::load_model(pipeline_path);
        const auto file = read_features_csv(in_path, model.variant);
        const fdi::Matrix x = model.normalizer.apply(file.features);
        fdi::csv::Writer out(out_path);
        out.header({"key", model.is_ocsvm ? "decision" : "s_I", "h_hat", "h_true", "fault_id"});
        std::vector<std::string> row;
        for (Eigen::Index i = 0; i < x.rows(); ++i) {
            double score;
            int h_hat;
            if (model.is_ocsvm) {
                score = fdi::ocsvm_decision(model.svm, fdi::Vector(x.row(i)));
                h_hat = score >= 0.0 ? 1 : 0;
            } else {
                score = fdi::similarity(model.pipeline, fdi::Matrix(x.row(i)))[0];
                h_hat = fdi::detect(score);
            }
            row = {file.keys[static_cast<size_t>(i)], fdi::csv::format(score),
                   std::to_string(h_hat), std::to_string(file.h_s[static_cast<size_t>(i)]),
                   std::to_string(file.fault_ids[static_cast<size_t>(i)])};
            out.line(row);
        }
        return 0;
    }

    if (isolate->parsed()) {
        const auto model = fdi::load_model(pipeline_path);
        if (model.is_ocsvm || model.isolation.nu.size() == 0)
            throw std::invalid_argument("isolation requires an AE or VAE model bundle");
        const auto file = read_features_csv(in_path, model.variant);
        const fdi::Matrix x = model.normalizer.apply(file.features);
        const auto reconstruct = fdi::reconstructor_of(model.pipeline);
        const fdi::Matrix d = fdi::isolation_scores(reconstruct, x, model.isolation);
        fdi::csv::Writer out(out_path);
        std::vector<std::string> header = {"key"};
        for (const auto& c : file.columns) header.push_back("d_" + c);
        header.push_back("affected");
        out.header(header);
        std::vector<std::string> row;
        for (Eigen::Index i = 0; i < d.rows(); ++i) {
            row = {file.keys[static_cast<size_t>(i)]};
            for (Eigen::Index c = 0; c < d.cols(); ++c) row.push_back(fdi::csv::format(d(i, c)));
            std::string affected;
            for (int id : fdi::rank_affected(fdi::Vector(d.row(i)))) {
                if (!affected.empty()) affected += ';';
                affected += file.columns[static_cast<size_t>(id)];
            }
            row.push_back(affected);
            out.line(row);
        }
        return 0;
    }

    if (evaluate->parsed()) {
        fs::create_directories(out_path);
        const auto table = fdi::run_experiment(cfg.experiment, plant);
        fdi::write_results_csv(table, (fs::path(out_path) / "results.csv").string());
        fdi::write_summary_csv(table, (fs::path(out_path) / "summary.csv").string());
        fdi::write_isolation_csv(table, (fs::path(out_path) / "isolation.csv").string());
        return 0;
    }

    if (noise->parsed()) {
        fs::create_directories(out_path);
        const auto points = fdi::noise_sweep(cfg.experiment, plant, cfg.noise_snr_db,
                                             fdi::model_kind_from_string(model_name));
        fdi::write_noise_csv(points, (fs::path(out_path) / "noise.csv").string());
        return 0;
    }

    if (envelope->parsed()) {
        fs::create_directories(out_path);
        const double floor = cfg.envelope_min_altitude_ft;
        const auto res = fdi::envelope_restriction(
            cfg.experiment, plant,
            [floor](const fdi::OperatingPoint& w) { return w.altitude_ft > floor; });
        fdi::csv::Writer out((fs::path(out_path) / "envelope.csv").string());
        out.header({"min_altitude_ft", "baseline_accuracy", "restricted_accuracy", "evaluable"});
        out.line({fdi::csv::format(floor), fdi::csv::format(res.baseline_accuracy),
                  res.evaluable ? fdi::csv::format(res.restricted_accuracy) : "",
                  res.evaluable ? "1" : "0"});
        return 0;
    }

    if (latent->parsed()) {
        const auto model = fdi::load_model(pipeline_path);
        if (model.is_ocsvm)
            throw std::invalid_argument("export-latent requires a deep model bundle");
        const auto file = read_features_csv(in_path, model.variant);
        const fdi::Matrix x = model.normalizer.apply(file.features);
        fdi::export_latent(model.pipeline, x, file.splits, file.h_s, file.fault_ids, out_path);
        return 0;
    }

    return 0;
}

} // namespace

int main(int argc, char** argv) {
    try {
        return run(argc, argv);
    } catch (const fdi::NumericError& e) {
        std::cerr << "numeric failure: " << e.what() << '\n';
        return 3;
    } catch (const fdi::nn::SolverError& e) {
        std::cerr << "solver failure: " << e.what() << '\n';
        return 3;
    } catch (const fdi::OptimizationError& e) {
        std::cerr << "optimization failure: " << e.what() << '\n';
        return 3;
    } catch (const fdi::nn::DivergenceError& e) {
        std::cerr << "training failure: " << e.what() << '\n';
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    }
}
