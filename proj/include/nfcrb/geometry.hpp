// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "nfcrb/core.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace nfcrb {

struct CarrierConfig {
    double carrier_freq = 2.37e9;   // Hz

    double wavelength() const { return speed_of_light / carrier_freq; }
    double wavenumber() const { return 2.0 * pi / wavelength(); }

    void validate() const
    {
        if (!(carrier_freq > 0.0) || !std::isfinite(carrier_freq))
            throw DomainError("carrier frequency must be positive and finite");
    }
};

// Transmit ULA along the y-axis centred at the origin, receive ULA parallel
// to it at x = R. Separation 0 means the two arrays coincide (monostatic).
struct ArrayGeometry {
    int num_tx = 1;
    int num_rx = 1;
    double tx_spacing = 0.0628;
    double rx_spacing = 0.0628;
    double array_separation = 0.0;

    bool monostatic() const { return array_separation == 0.0; }
    double tx_aperture() const { return num_tx * tx_spacing; }
    double rx_aperture() const { return num_rx * rx_spacing; }

    // Signed element offsets, centred on zero. An even receive count gives
    // half-integer offsets so that the index set stays symmetric.
    int tx_index(int storage) const { return storage - (num_tx - 1) / 2; }
    double rx_index(int storage) const { return storage - 0.5 * (num_rx - 1); }

    void validate() const
    {
        if (num_tx < 1) throw DomainError("num_tx must be >= 1");
        if (num_tx % 2 == 0) throw DomainError("num_tx must be odd, got " + std::to_string(num_tx));
        if (num_rx < 1) throw DomainError("num_rx must be >= 1");
        if (!(tx_spacing > 0.0)) throw DomainError("tx_spacing must be positive");
        if (!(rx_spacing > 0.0)) throw DomainError("rx_spacing must be positive");
        if (!(array_separation >= 0.0) || !std::isfinite(array_separation))
            throw DomainError("array_separation must be >= 0");
    }
};

struct TargetLocation {
    double angle = 0.0;   // rad, measured from the array normal
    double range = 10.0;  // m, to the transmit array centre

    void validate() const
    {
        if (!(range > 0.0) || !std::isfinite(range)) throw DomainError("target range must be positive");
        if (!(std::abs(angle) <= pi / 2)) throw DomainError("target angle must lie in [-pi/2, pi/2]");
    }
};

inline double eps_tx(const ArrayGeometry& geom, const TargetLocation& tgt)
{
    return geom.tx_spacing / tgt.range;
}

inline void check_tx_index(const ArrayGeometry& geom, int m)
{
    int half = (geom.num_tx - 1) / 2;
    if (m < -half || m > half)
        throw DomainError("transmit element index " + std::to_string(m) + " outside array");
}

inline double exact_tx_range(const ArrayGeometry& geom, const TargetLocation& tgt, int m)
{
    check_tx_index(geom, m);
    tgt.validate();
    double e = m * eps_tx(geom, tgt);
    double arg = 1.0 - 2.0 * e * std::sin(tgt.angle) + e * e;
    return tgt.range * std::sqrt(std::max(arg, 0.0));
}

inline double taylor_tx_range(const ArrayGeometry& geom, const TargetLocation& tgt, int m)
{
    check_tx_index(geom, m);
    tgt.validate();
    double md = m * geom.tx_spacing;
    double c = std::cos(tgt.angle);
    return tgt.range + md * md * c * c / (2.0 * tgt.range) - md * std::sin(tgt.angle);
}

struct BistaticPair {
    double l;     // m, target to receive-array centre
    double phi;   // rad, direction seen from the receive array
};

inline double rx_center_distance(const ArrayGeometry& geom, const TargetLocation& tgt)
{
    double R = geom.array_separation, r = tgt.range;
    double l2 = R * R + r * r - 2.0 * R * r * std::cos(tgt.angle);
    return std::sqrt(std::max(l2, 0.0));
}

inline BistaticPair bistatic_transform(const ArrayGeometry& geom, const TargetLocation& tgt)
{
    tgt.validate();
    if (!(geom.array_separation > 0.0)) throw DomainError("bistatic transform needs array_separation > 0");
    double l = rx_center_distance(geom, tgt);
    if (!(l > 0.0)) throw DegenerateGeometryError("target coincides with the receive array centre (l = 0)");
    double s = std::clamp(tgt.range * std::sin(tgt.angle) / l, -1.0, 1.0);
    return {l, std::asin(s)};
}

// n is the signed (possibly half-integer) receive offset.
inline double exact_rx_range(const ArrayGeometry& geom, const TargetLocation& tgt, double n)
{
    tgt.validate();
    double slot = n + 0.5 * (geom.num_rx - 1);
    if (slot < 0.0 || slot > geom.num_rx - 1 || slot != std::floor(slot))
        throw DomainError("receive element index outside array");
    if (!(rx_center_distance(geom, tgt) > 0.0))
        throw DegenerateGeometryError("target coincides with the receive array centre (l = 0)");
    double R = geom.array_separation, r = tgt.range, nd = n * geom.rx_spacing;
    double v = R * R + r * r - 2.0 * R * r * std::cos(tgt.angle) - 2.0 * nd * r * std::sin(tgt.angle) + nd * nd;
    return std::sqrt(std::max(v, 0.0));
}

// Angle subtended at the target by the transmit aperture D_T = M d_T.
// Uses the single-atan2 form of the sum of the two edge arctangents, which
// stays accurate when D_T/r is small.
inline double angular_span(const ArrayGeometry& geom, const TargetLocation& tgt)
{
    tgt.validate();
    double c = std::cos(tgt.angle);
    if (std::abs(tgt.angle) == pi / 2) throw SingularGeometryError("angular span undefined at |theta| = pi/2");
    double x = geom.tx_aperture() / tgt.range;
    return std::atan2(x * c, 1.0 - 0.25 * x * x);
}

inline bool amplitude_model_valid(const ArrayGeometry& geom, const TargetLocation& tgt)
{
    return tgt.range > 1.2 * geom.tx_aperture();
}

inline WarningSet geometry_warnings(const ArrayGeometry& geom, const TargetLocation& tgt)
{
    WarningSet w = warn_none;
    if (eps_tx(geom, tgt) >= 0.1) w |= warn_closed_form_accuracy;
    if (!amplitude_model_valid(geom, tgt)) w |= warn_amplitude_model;
    return w;
}

} // namespace nfcrb
