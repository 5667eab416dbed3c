#pragma once

#include <string>
#include <vector>

#include "fdi/csv.hpp"
#include "fdi/types.hpp"

namespace fdi {

/// One row of UKF output: posterior-mean health estimate and the model
/// responses recomputed at that mean.
struct CalibrationRow {
    Eigen::Matrix<double, kNumHealthParams, 1> theta_hat;
    Eigen::Matrix<double, kNumSensors, 1> xs_hat;
    Eigen::Matrix<double, kNumVirtualSensors, 1> xv_hat;
    double innovation_norm = 0.0;
};

struct CalibrationTrace {
    std::vector<CalibrationRow> rows;

    size_t size() const { return rows.size(); }
    bool empty() const { return rows.empty(); }
};

inline std::vector<std::string> calibration_csv_header() {
    std::vector<std::string> h = {"flight_cycle", "index_in_flight"};
    for (const auto& n : HealthParameters::names()) h.push_back(n + "_hat");
    for (const auto& n : SensorVector::names()) h.push_back(n + "_hat");
    for (const auto& n : VirtualSensorVector::names()) h.push_back(n + "_hat");
    h.push_back("innovation_norm");
    return h;
}

} // namespace fdi
