#pragma once

#include <algorithm>
#include <cstdint>
#include <numeric>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "fdi/csv.hpp"
#include "fdi/plant.hpp"
#include "fdi/rng.hpp"
#include "fdi/trace.hpp"
#include "fdi/types.hpp"

namespace fdi {

enum class SplitTag { S_T, S_V, D_U, D_T };

inline std::string to_string(SplitTag t) {
    switch (t) {
        case SplitTag::S_T: return "S_T";
        case SplitTag::S_V: return "S_V";
        case SplitTag::D_U: return "D_U";
        case SplitTag::D_T: return "D_T";
    }
    throw std::logic_error("bad split tag");
}

inline SplitTag split_tag_from_string(const std::string& s) {
    if (s == "S_T") return SplitTag::S_T;
    if (s == "S_V") return SplitTag::S_V;
    if (s == "D_U") return SplitTag::D_U;
    if (s == "D_T") return SplitTag::D_T;
    throw std::invalid_argument("unknown split tag '" + s + "'");
}

enum class Variant { CMBD, Residual, Hybrid };

inline std::string to_string(Variant v) {
    switch (v) {
        case Variant::CMBD: return "cm";
        case Variant::Residual: return "residual";
        case Variant::Hybrid: return "hybrid";
    }
    throw std::logic_error("bad variant");
}

inline Variant variant_from_string(const std::string& s) {
    if (s == "cm") return Variant::CMBD;
    if (s == "residual") return Variant::Residual;
    if (s == "hybrid") return Variant::Hybrid;
    throw std::invalid_argument("unknown variant '" + s + "'");
}

inline int variant_dim(Variant v) {
    switch (v) {
        case Variant::CMBD: return 17;
        case Variant::Residual: return 31;
        case Variant::Hybrid: return 45;
    }
    throw std::logic_error("bad variant");
}

/// One time-stamped observation.
struct Snapshot {
    int flight_cycle = 0;
    int index_in_flight = 0;
    OperatingPoint w;
    SensorVector x_s;
    int h_s = 1;      // 1 healthy, 0 faulty
    int fault_id = 0; // 0 when healthy
    HealthParameters true_theta;
    SplitTag split = SplitTag::S_T;
};

struct FaultEntry {
    int fault_id;
    double magnitude;     // signed fraction applied to the target component
    int target_parameter; // HealthParameters index
    SplitTag destination; // D_U or D_T
};

struct GenerationConfig {
    int healthy_flights = 20;
    int snapshots_per_flight = 175;
    int du_healthy_snapshots = 60;
    double healthy_theta_sigma = 0.002;
    double min_altitude_ft = 10000.0;
    std::vector<FaultEntry> fault_schedule = {
        {1, -0.005, HealthParameters::HpcEff, SplitTag::D_U},
        {2, -0.010, HealthParameters::HpcEff, SplitTag::D_U},
        {3, -0.015, HealthParameters::HpcEff, SplitTag::D_T},
        {4, -0.020, HealthParameters::HpcEff, SplitTag::D_T},
    };

    void validate() const {
        double prev = 0.0;
        int target = -1;
        for (const auto& f : fault_schedule) {
            if (f.target_parameter < 0 || f.target_parameter >= kNumHealthParams)
                throw std::invalid_argument("fault schedule targets unknown theta index " +
                                            std::to_string(f.target_parameter));
            if (target >= 0 && f.target_parameter != target)
                throw std::invalid_argument("fault schedule must target a single theta index");
            target = f.target_parameter;
            if (f.magnitude >= prev)
                throw std::invalid_argument("fault magnitudes must be strictly decreasing");
            prev = f.magnitude;
        }
    }
};

struct DatasetBundle {
    std::vector<Snapshot> snapshots;
    std::uint64_t seed = 0;

    std::vector<const Snapshot*> select(SplitTag tag) const {
        std::vector<const Snapshot*> out;
        for (const auto& s : snapshots)
            if (s.split == tag) out.push_back(&s);
        return out;
    }
};

namespace detail {

struct FlightProfile {
    double cruise_alt, cruise_mach;
    double climb_end, descend_start; // as fractions of the flight
};

inline FlightProfile sample_profile(Rng& rng) {
    FlightProfile p;
    p.cruise_alt = rng.uniform(26000.0, 36000.0);
    p.cruise_mach = rng.uniform(0.62, 0.80);
    p.climb_end = rng.uniform(0.18, 0.30);
    p.descend_start = rng.uniform(0.70, 0.82);
    return p;
}

inline OperatingPoint profile_point(const FlightProfile& p, double t, double min_alt, Rng& rng) {
    // climb - cruise - descend; altitude stays above the envelope floor
    const double base_alt = min_alt + 1000.0;
    double alt, mach, tra;
    if (t < p.climb_end) {
        const double f = t / p.climb_end;
        alt = base_alt + f * (p.cruise_alt - base_alt);
        mach = 0.45 + f * (p.cruise_mach - 0.45);
        tra = 88.0 - 8.0 * f;
    } else if (t < p.descend_start) {
        alt = p.cruise_alt;
        mach = p.cruise_mach;
        tra = 75.0;
    } else {
        const double f = (t - p.descend_start) / (1.0 - p.descend_start);
        alt = p.cruise_alt - f * (p.cruise_alt - base_alt);
        mach = p.cruise_mach - f * (p.cruise_mach - 0.48);
        tra = 48.0 - 10.0 * f;
    }
    alt += rng.normal(150.0);
    mach += rng.normal(0.004);
    tra += rng.normal(0.8);
    alt = std::clamp(alt, min_alt + 10.0, 39500.0);
    mach = std::clamp(mach, 0.30, 0.88);
    tra = std::clamp(tra, 25.0, 98.0);
    return {alt, mach, tra};
}

inline HealthParameters healthy_theta(Rng& rng, double sigma) {
    HealthParameters h;
    for (int i = 0; i < kNumHealthParams; ++i) h.theta[i] = rng.normal(sigma);
    return h;
}

} // namespace detail

/// Generates the synthetic study dataset: healthy flights into the
/// labeled split, one short healthy block plus staged faults into the
/// development and test splits. Deterministic under (cfg, seed).
inline DatasetBundle generate_dataset(const GenerationConfig& cfg, const Plant& plant,
                                      std::uint64_t seed) {
    cfg.validate();
    Rng rng(seed ^ 0x9e3779b97f4a7c15ULL);
    DatasetBundle bundle;
    bundle.seed = seed;
    int flight = 0;

    auto emit_flight = [&](int count, SplitTag tag, int fault_id, double magnitude, int target) {
        const auto profile = detail::sample_profile(rng);
        for (int i = 0; i < count; ++i) {
            Snapshot s;
            s.flight_cycle = flight;
            s.index_in_flight = i;
            const double t = count > 1 ? double(i) / (count - 1) : 0.0;
            s.w = detail::profile_point(profile, t, cfg.min_altitude_ft, rng);
            s.true_theta = detail::healthy_theta(rng, cfg.healthy_theta_sigma);
            s.fault_id = fault_id;
            s.h_s = fault_id == 0 ? 1 : 0;
            if (fault_id != 0) s.true_theta.theta[target] = magnitude;
            s.x_s = plant.simulate(s.w, s.true_theta).x_s;
            s.split = tag;
            bundle.snapshots.push_back(std::move(s));
        }
        ++flight;
    };

    for (int f = 0; f < cfg.healthy_flights; ++f)
        emit_flight(cfg.snapshots_per_flight, SplitTag::S_T, 0, 0.0, 0);
    // initial healthy operation ahead of the first fault
    emit_flight(cfg.du_healthy_snapshots, SplitTag::D_U, 0, 0.0, 0);
    for (const auto& fault : cfg.fault_schedule)
        emit_flight(cfg.snapshots_per_flight, fault.destination, fault.fault_id, fault.magnitude,
                    fault.target_parameter);
    return bundle;
}

/// delta = x_s - S(w, theta_healthy).x_s, componentwise (ids delta_4 .. delta_17).
inline Eigen::Matrix<double, kNumSensors, 1> compute_residuals(
    const Snapshot& snap, const Plant& plant,
    const HealthParameters& theta_healthy = HealthParameters{}) {
    return snap.x_s.values - plant.simulate(snap.w, theta_healthy).x_s.values;
}

/// Assembles one input-space variant in fixed column order (w first).
inline Vector assemble_input(const Snapshot& snap, const CalibrationRow* calib, Variant variant,
                             const Plant* plant = nullptr) {
    Vector v(variant_dim(variant));
    v[0] = snap.w.altitude_ft;
    v[1] = snap.w.mach;
    v[2] = snap.w.power_lever;
    switch (variant) {
        case Variant::CMBD:
            v.segment(3, kNumSensors) = snap.x_s.values;
            break;
        case Variant::Residual: {
            if (!plant)
                throw std::invalid_argument("Residual variant requires the plant for residuals");
            v.segment(3, kNumSensors) = snap.x_s.values;
            v.segment(3 + kNumSensors, kNumSensors) = compute_residuals(snap, *plant);
            break;
        }
        case Variant::Hybrid: {
            if (!calib)
                throw std::invalid_argument("Hybrid variant requires a calibration row");
            v.segment(3, kNumSensors) = calib->xs_hat;
            v.segment(3 + kNumSensors, kNumVirtualSensors) = calib->xv_hat;
            v.segment(3 + kNumSensors + kNumVirtualSensors, kNumHealthParams) = calib->theta_hat;
            break;
        }
    }
    return v;
}

inline std::vector<std::string> variant_columns(Variant variant) {
    std::vector<std::string> cols = {"alt", "XM", "TRA"};
    switch (variant) {
        case Variant::CMBD:
            for (const auto& n : SensorVector::names()) cols.push_back(n);
            break;
        case Variant::Residual:
            for (const auto& n : SensorVector::names()) cols.push_back(n);
            for (const auto& n : SensorVector::names()) cols.push_back("delta_" + n);
            break;
        case Variant::Hybrid:
            for (const auto& n : SensorVector::names()) cols.push_back(n + "_hat");
            for (const auto& n : VirtualSensorVector::names()) cols.push_back(n + "_hat");
            for (const auto& n : HealthParameters::names()) cols.push_back(n + "_hat");
            break;
    }
    return cols;
}

/// Per-column min/max scaler onto [-1, 1]; constant columns map to 0.
class Normalizer {
  public:
    Normalizer() = default;

    static Normalizer fit(const Matrix& train) {
        if (train.rows() == 0) throw std::invalid_argument("Normalizer: empty training matrix");
        Normalizer n;
        n.min_ = train.colwise().minCoeff();
        n.max_ = train.colwise().maxCoeff();
        return n;
    }

    Vector apply(const Vector& v) const {
        Vector out(v.size());
        for (Eigen::Index i = 0; i < v.size(); ++i) {
            const double range = max_[i] - min_[i];
            out[i] = range > 0.0 ? 2.0 * (v[i] - min_[i]) / range - 1.0 : 0.0;
        }
        return out;
    }

    Matrix apply(const Matrix& m) const {
        Matrix out(m.rows(), m.cols());
        for (Eigen::Index r = 0; r < m.rows(); ++r) out.row(r) = apply(Vector(m.row(r)));
        return out;
    }

    /// Affine inverse; constant columns recover their fitted value.
    Vector invert(const Vector& v) const {
        Vector out(v.size());
        for (Eigen::Index i = 0; i < v.size(); ++i) {
            const double range = max_[i] - min_[i];
            out[i] = range > 0.0 ? min_[i] + (v[i] + 1.0) * range / 2.0 : min_[i];
        }
        return out;
    }

    const Eigen::RowVectorXd& col_min() const { return min_; }
    const Eigen::RowVectorXd& col_max() const { return max_; }

  private:
    Eigen::RowVectorXd min_, max_;
};

/// Seeded shuffle split of the labeled healthy data into training and
/// validation index sets over `n` rows.
inline std::pair<std::vector<int>, std::vector<int>> split_labeled(int n, double fraction,
                                                                   std::uint64_t seed) {
    if (!(fraction > 0.0 && fraction < 1.0))
        throw std::invalid_argument("split fraction must be in (0, 1)");
    std::vector<int> idx(n);
    std::iota(idx.begin(), idx.end(), 0);
    Rng rng(seed ^ 0x5851f42d4c957f2dULL);
    for (int i = n - 1; i > 0; --i) {
        const int j = static_cast<int>(rng.raw() % static_cast<std::uint64_t>(i + 1));
        std::swap(idx[i], idx[j]);
    }
    const int n_val = static_cast<int>(std::lround(fraction * n));
    std::vector<int> val(idx.begin(), idx.begin() + n_val);
    std::vector<int> train(idx.begin() + n_val, idx.end());
    return {train, val};
}

/// Applies split_labeled over the bundle's S_T snapshots, retagging the
/// validation subset as S_V.
inline void tag_validation_split(DatasetBundle& bundle, double fraction, std::uint64_t seed) {
    std::vector<int> labeled;
    for (size_t i = 0; i < bundle.snapshots.size(); ++i)
        if (bundle.snapshots[i].split == SplitTag::S_T) labeled.push_back(static_cast<int>(i));
    auto [train, val] = split_labeled(static_cast<int>(labeled.size()), fraction, seed);
    for (int k : val) bundle.snapshots[labeled[k]].split = SplitTag::S_V;
}

inline std::vector<std::string> snapshot_csv_header() {
    std::vector<std::string> h = {"flight_cycle", "index_in_flight", "alt", "XM", "TRA"};
    for (const auto& n : SensorVector::names()) h.push_back(n);
    h.push_back("h_s");
    h.push_back("fault_id");
    for (const auto& n : HealthParameters::names()) h.push_back(n);
    h.push_back("split_tag");
    return h;
}

inline void write_csv(const DatasetBundle& bundle, const std::string& path) {
    csv::Writer out(path);
    out.header(snapshot_csv_header());
    std::vector<std::string> row;
    for (const auto& s : bundle.snapshots) {
        row.clear();
        row.push_back(std::to_string(s.flight_cycle));
        row.push_back(std::to_string(s.index_in_flight));
        row.push_back(csv::format(s.w.altitude_ft));
        row.push_back(csv::format(s.w.mach));
        row.push_back(csv::format(s.w.power_lever));
        for (int i = 0; i < kNumSensors; ++i) row.push_back(csv::format(s.x_s.values[i]));
        row.push_back(std::to_string(s.h_s));
        row.push_back(std::to_string(s.fault_id));
        for (int i = 0; i < kNumHealthParams; ++i) row.push_back(csv::format(s.true_theta.theta[i]));
        row.push_back(to_string(s.split));
        out.line(row);
    }
}

inline DatasetBundle read_csv(const std::string& path) {
    const csv::Table t = csv::read(path);
    const auto expected = snapshot_csv_header();
    for (const auto& name : expected) t.column(name); // raises naming the missing column
    DatasetBundle bundle;
    int lineno = 1;
    for (const auto& r : t.rows) {
        ++lineno;
        Snapshot s;
        int c = 0;
        s.flight_cycle = static_cast<int>(csv::parse_double(r[c++], lineno));
        s.index_in_flight = static_cast<int>(csv::parse_double(r[c++], lineno));
        s.w.altitude_ft = csv::parse_double(r[c++], lineno);
        s.w.mach = csv::parse_double(r[c++], lineno);
        s.w.power_lever = csv::parse_double(r[c++], lineno);
        for (int i = 0; i < kNumSensors; ++i) s.x_s.values[i] = csv::parse_double(r[c++], lineno);
        s.h_s = static_cast<int>(csv::parse_double(r[c++], lineno));
        s.fault_id = static_cast<int>(csv::parse_double(r[c++], lineno));
        for (int i = 0; i < kNumHealthParams; ++i)
            s.true_theta.theta[i] = csv::parse_double(r[c++], lineno);
        s.split = split_tag_from_string(r[c++]);
        bundle.snapshots.push_back(std::move(s));
    }
    return bundle;
}

} // namespace fdi
