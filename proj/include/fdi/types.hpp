#pragma once

#include <array>
#include <cmath>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace fdi {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

inline constexpr int kNumSensors = 14;        // ids 4..17
inline constexpr int kNumVirtualSensors = 18; // ids 18..35
inline constexpr int kNumHealthParams = 10;   // ids 36..45

/// Scenario-descriptor operating conditions (ids 1..3).
struct OperatingPoint {
    double altitude_ft = 0.0;  // 0 .. 40000
    double mach = 0.0;         // 0 .. 0.9
    double power_lever = 20.0; // throttle-resolver angle, percent, 20 .. 100

    void validate() const {
        auto check = [](double v, double lo, double hi, const char* name) {
            if (!std::isfinite(v) || v < lo || v > hi)
                throw std::domain_error(std::string("OperatingPoint: ") + name + " out of range");
        };
        check(altitude_ft, 0.0, 40000.0, "altitude_ft");
        check(mach, 0.0, 0.9, "mach");
        check(power_lever, 20.0, 100.0, "power_lever");
    }
};

/// Multiplicative efficiency/flow modifiers per engine component,
/// ids 36..45: fan/LPC/HPC/HPT/LPT x efficiency/flow.
struct HealthParameters {
    Eigen::Matrix<double, kNumHealthParams, 1> theta =
        Eigen::Matrix<double, kNumHealthParams, 1>::Zero();

    enum Index {
        FanEff = 0,
        FanFlow = 1,
        LpcEff = 2,
        LpcFlow = 3,
        HpcEff = 4,
        HpcFlow = 5,
        HptEff = 6,
        HptFlow = 7,
        LptEff = 8,
        LptFlow = 9,
    };

    static const std::array<std::string, kNumHealthParams>& names() {
        static const std::array<std::string, kNumHealthParams> n = {
            "fan_eff_mod", "fan_flow_mod", "LPC_eff_mod", "LPC_flow_mod", "HPC_eff_mod",
            "HPC_flow_mod", "HPT_eff_mod", "HPT_flow_mod", "LPT_eff_mod", "LPT_flow_mod"};
        return n;
    }

    void validate() const {
        for (int i = 0; i < kNumHealthParams; ++i) {
            const double v = theta[i];
            if (!std::isfinite(v) || v < -0.10 || v > 0.05)
                throw std::domain_error("HealthParameters: " + names()[i] + " out of range");
        }
    }
};

/// Measured condition-monitoring sensors, ids 4..17.
struct SensorVector {
    Eigen::Matrix<double, kNumSensors, 1> values =
        Eigen::Matrix<double, kNumSensors, 1>::Zero();

    enum Index { Wf = 0, Nf, Nc, T2, T24, T30, T48, T50, P15, P21, P24, Ps30, P40, P50 };

    static const std::array<std::string, kNumSensors>& names() {
        static const std::array<std::string, kNumSensors> n = {
            "Wf", "Nf", "Nc", "T2", "T24", "T30", "T48",
            "T50", "P15", "P21", "P24", "Ps30", "P40", "P50"};
        return n;
    }
};

/// Unmeasured process quantities computable only from the model, ids 18..35.
struct VirtualSensorVector {
    Eigen::Matrix<double, kNumVirtualSensors, 1> values =
        Eigen::Matrix<double, kNumVirtualSensors, 1>::Zero();

    enum Index {
        T40 = 0, P30, P45, W21, W22, W25, W31, W32, W48,
        W50, epr, SmFan, SmLPC, SmHPC, NRf, NRc, PCNfR, phi
    };

    static const std::array<std::string, kNumVirtualSensors>& names() {
        static const std::array<std::string, kNumVirtualSensors> n = {
            "T40", "P30", "P45", "W21", "W22", "W25", "W31", "W32", "W48",
            "W50", "epr", "SmFan", "SmLPC", "SmHPC", "NRf", "NRc", "PCNfR", "phi"};
        return n;
    }
};

} // namespace fdi
