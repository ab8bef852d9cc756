// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <complex>
#include <cstdint>
#include <limits>
#include <numbers>
#include <stdexcept>
#include <string>
#include <string_view>

namespace nfcrb {

using cd = std::complex<double>;
using real_ext = long double;   // accumulators for Fisher sums and 2x2 Schur algebra
using cx_ext = std::complex<long double>;

inline constexpr double speed_of_light = 299792458.0;
inline constexpr double pi = std::numbers::pi;
inline constexpr double inf = std::numeric_limits<double>::infinity();

// Error hierarchy. DomainError covers bad arguments, the geometry errors
// carry the distinct failure states of the distance model.
struct DomainError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};
struct DegenerateGeometryError : std::domain_error {
    using std::domain_error::domain_error;
};
struct SingularGeometryError : std::domain_error {
    using std::domain_error::domain_error;
};
struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct NumericalError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

enum class Mode { MIMO, Phased };
enum class Topology { Monostatic, BistaticNearFarTx };
enum class Method { NumericalFim, ExactSumQ, ClosedForm, Asymptotic, Taylor, FarFieldUPW };
enum class Regime { LargeAperture, InfiniteAperture, SmallAperture };

// Non-fatal result annotations, combined as a bit set.
enum Warning : std::uint32_t {
    warn_none = 0,
    warn_closed_form_accuracy = 1u << 0,   // eps_T >= 0.1, or closed forms at D_T/r < 2e-3
    warn_amplitude_model = 1u << 1,        // r <= 1.2 D_T
    warn_regime_degenerate = 1u << 2,      // exact zero from a sin(theta) numerator
    warn_outside_regime = 1u << 3,         // asymptotic formula used away from its regime
    warn_rounded_to_odd = 1u << 4,         // even M bumped to the next odd value
};
using WarningSet = std::uint32_t;

inline std::string warnings_to_string(WarningSet w)
{
    std::string out;
    auto add = [&](Warning bit, std::string_view name) {
        if (w & bit) {
            if (!out.empty()) out += ';';
            out += name;
        }
    };
    add(warn_closed_form_accuracy, "closed_form_accuracy_degraded");
    add(warn_amplitude_model, "amplitude_model_invalid");
    add(warn_regime_degenerate, "regime_degenerate");
    add(warn_outside_regime, "outside_regime");
    add(warn_rounded_to_odd, "M_rounded_to_odd");
    return out;
}

inline std::string_view to_string(Mode m) { return m == Mode::MIMO ? "MIMO" : "Phased"; }

inline std::string_view to_string(Topology t)
{
    return t == Topology::Monostatic ? "Monostatic" : "BistaticNearFarTx";
}

inline std::string_view to_string(Method m)
{
    switch (m) {
    case Method::NumericalFim: return "NumericalFim";
    case Method::ExactSumQ: return "ExactSum";
    case Method::ClosedForm: return "ClosedForm";
    case Method::Asymptotic: return "Asymptotic";
    case Method::Taylor: return "Taylor";
    case Method::FarFieldUPW: return "FarFieldUPW";
    }
    return "?";
}

inline std::string_view to_string(Regime r)
{
    switch (r) {
    case Regime::LargeAperture: return "large";
    case Regime::InfiniteAperture: return "infinite";
    case Regime::SmallAperture: return "small";
    }
    return "?";
}

inline double db_to_linear(double db) { return std::pow(10.0, db / 10.0); }
inline double linear_to_db(double x) { return 10.0 * std::log10(x); }

} // namespace nfcrb
