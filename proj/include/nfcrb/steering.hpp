// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "nfcrb/geometry.hpp"

#include <cmath>
#include <complex>
#include <vector>

namespace nfcrb {

struct SteeringVector {
    std::vector<cd> values;
    std::vector<cd> d_theta;
    std::vector<cd> d_range;

    std::size_t length() const { return values.size(); }
};

struct ObservationVector {
    std::vector<cd> g;
    std::vector<cd> g_theta;
    std::vector<cd> g_range;
    Mode mode = Mode::MIMO;
    Topology topology = Topology::Monostatic;
    int num_tx = 1;
    int num_rx = 1;

    std::size_t length() const { return g.size(); }
};

namespace detail {

inline cd unit_phasor(double phase) { return {std::cos(phase), std::sin(phase)}; }

inline void check_tx_scenario(const ArrayGeometry& geom, const TargetLocation& tgt, const CarrierConfig& carrier)
{
    geom.validate();
    tgt.validate();
    carrier.validate();
    if (!(eps_tx(geom, tgt) < 1.0)) throw DomainError("d_T / r must be < 1");
}

} // namespace detail

inline SteeringVector tx_steering(const ArrayGeometry& geom, const TargetLocation& tgt, const CarrierConfig& carrier)
{
    detail::check_tx_scenario(geom, tgt, carrier);
    const int M = geom.num_tx;
    const double k = carrier.wavenumber(), r = tgt.range, eps = eps_tx(geom, tgt);
    const double s = std::sin(tgt.angle), c = std::cos(tgt.angle);
    SteeringVector out;
    out.values.resize(M);
    out.d_theta.resize(M);
    out.d_range.resize(M);
    for (int i = 0; i < M; ++i) {
        int m = geom.tx_index(i);
        double e = m * eps;
        double root = std::sqrt(1.0 - 2.0 * e * s + e * e);
        double drdtheta = -m * geom.tx_spacing * c / root;
        double drdr = (1.0 - e * s) / root;
        cd a = detail::unit_phasor(-k * r * root);
        cd minus_jk_a = cd(0.0, -k) * a;
        out.values[i] = a;
        out.d_theta[i] = minus_jk_a * drdtheta;
        out.d_range[i] = minus_jk_a * drdr;
    }
    return out;
}

// Spherical-wave receive response b_n = exp(-j k l_n).
inline SteeringVector rx_steering_near(const ArrayGeometry& geom, const TargetLocation& tgt, const CarrierConfig& carrier)
{
    geom.validate();
    tgt.validate();
    carrier.validate();
    if (!(rx_center_distance(geom, tgt) > 0.0))
        throw DegenerateGeometryError("target coincides with the receive array centre (l = 0)");
    const int N = geom.num_rx;
    const double k = carrier.wavenumber(), R = geom.array_separation, r = tgt.range;
    const double s = std::sin(tgt.angle), c = std::cos(tgt.angle);
    SteeringVector out;
    out.values.resize(N);
    out.d_theta.resize(N);
    out.d_range.resize(N);
    for (int i = 0; i < N; ++i) {
        double nd = geom.rx_index(i) * geom.rx_spacing;
        double ln = std::sqrt(R * R + r * r - 2.0 * R * r * c - 2.0 * nd * r * s + nd * nd);
        if (!(ln > 0.0)) throw DegenerateGeometryError("target coincides with a receive element");
        double dl_dtheta = (R * r * s - nd * r * c) / ln;
        double dl_dr = (r - R * c - nd * s) / ln;
        cd b = detail::unit_phasor(-k * ln);
        cd minus_jk_b = cd(0.0, -k) * b;
        out.values[i] = b;
        out.d_theta[i] = minus_jk_b * dl_dtheta;
        out.d_range[i] = minus_jk_b * dl_dr;
    }
    return out;
}

// Derivatives of sin(phi) with respect to the transmit-side (theta, r).
struct ReceiveSineGradient {
    double sin_phi;
    double gamma_theta;
    double gamma_range;
};

inline ReceiveSineGradient receive_sine_gradient(const ArrayGeometry& geom, const TargetLocation& tgt)
{
    const double R = geom.array_separation, r = tgt.range;
    const double s = std::sin(tgt.angle), c = std::cos(tgt.angle);
    const double l = bistatic_transform(geom, tgt).l;
    const double l3 = l * l * l;
    return {r * s / l,
            (r * c * (R * R + r * r - R * r * c) - R * r * r) / l3,
            R * s * (R - r * c) / l3};
}

// Plane-wave receive response with the common phase exp(-j k l) dropped.
inline SteeringVector rx_steering_far(const ArrayGeometry& geom, const TargetLocation& tgt, const CarrierConfig& carrier)
{
    geom.validate();
    carrier.validate();
    auto grad = receive_sine_gradient(geom, tgt);
    const int N = geom.num_rx;
    const double k = carrier.wavenumber();
    SteeringVector out;
    out.values.resize(N);
    out.d_theta.resize(N);
    out.d_range.resize(N);
    for (int i = 0; i < N; ++i) {
        double knd = k * geom.rx_index(i) * geom.rx_spacing;
        cd b = detail::unit_phasor(knd * grad.sin_phi);
        cd jknd_b = cd(0.0, knd) * b;
        out.values[i] = b;
        out.d_theta[i] = jknd_b * grad.gamma_theta;
        out.d_range[i] = jknd_b * grad.gamma_range;
    }
    return out;
}

namespace detail {

inline void check_topology(const ArrayGeometry& geom, Topology topology)
{
    if (topology == Topology::BistaticNearFarTx && !(geom.array_separation > 0.0))
        throw DomainError("bistatic topology needs array_separation > 0");
    if (topology == Topology::Monostatic && geom.array_separation != 0.0)
        throw DomainError("monostatic topology needs array_separation = 0");
}

// (b kron a)[n*M + m] = b[n] a[m]
inline std::vector<cd> kron(const std::vector<cd>& b, const std::vector<cd>& a)
{
    std::vector<cd> out(b.size() * a.size());
    std::size_t idx = 0;
    for (const cd& bn : b)
        for (const cd& am : a) out[idx++] = bn * am;
    return out;
}

} // namespace detail

// For the monostatic topology the receive array is the transmit array
// (num_rx and rx_spacing are ignored).
inline ObservationVector build_observation(const ArrayGeometry& geom, const TargetLocation& tgt,
                                           const CarrierConfig& carrier, Mode mode, Topology topology)
{
    detail::check_topology(geom, topology);
    SteeringVector a = tx_steering(geom, tgt, carrier);
    ObservationVector obs;
    obs.mode = mode;
    obs.topology = topology;
    obs.num_tx = geom.num_tx;
    SteeringVector b = topology == Topology::Monostatic ? a : rx_steering_far(geom, tgt, carrier);
    obs.num_rx = static_cast<int>(b.length());
    if (mode == Mode::Phased) {
        obs.g = std::move(b.values);
        obs.g_theta = std::move(b.d_theta);
        obs.g_range = std::move(b.d_range);
        return obs;
    }
    obs.g = detail::kron(b.values, a.values);
    obs.g_theta = detail::kron(b.d_theta, a.values);
    obs.g_range = detail::kron(b.d_range, a.values);
    auto bt = detail::kron(b.values, a.d_theta);
    auto br = detail::kron(b.values, a.d_range);
    for (std::size_t i = 0; i < obs.g.size(); ++i) {
        obs.g_theta[i] += bt[i];
        obs.g_range[i] += br[i];
    }
    return obs;
}

// Observation model bound to one scenario, evaluated at hypothesised
// (theta, r). This is the obs_builder consumed by the grid estimators.
struct SteeringModel {
    ArrayGeometry geom;
    CarrierConfig carrier;
    Mode mode = Mode::MIMO;
    Topology topology = Topology::Monostatic;

    ObservationVector observe(double theta, double range) const
    {
        return build_observation(geom, {theta, range}, carrier, mode, topology);
    }

    std::size_t length() const
    {
        std::size_t M = geom.num_tx;
        std::size_t N = topology == Topology::Monostatic ? M : static_cast<std::size_t>(geom.num_rx);
        return mode == Mode::MIMO ? M * N : N;
    }

    // Values of g only; no derivatives, no validation beyond the basics.
    void values(double theta, double range, std::vector<cd>& out) const
    {
        const double k = carrier.wavenumber();
        const double s = std::sin(theta), c = std::cos(theta);
        const int M = geom.num_tx;
        tx_buf_.resize(M);
        const double eps = geom.tx_spacing / range;
        for (int i = 0; i < M; ++i) {
            double e = geom.tx_index(i) * eps;
            tx_buf_[i] = detail::unit_phasor(-k * range * std::sqrt(1.0 - 2.0 * e * s + e * e));
        }
        if (topology == Topology::Monostatic) {
            rx_buf_ = tx_buf_;
        } else {
            const double R = geom.array_separation;
            double sin_phi = range * s / std::sqrt(std::max(R * R + range * range - 2.0 * R * range * c, 0.0));
            rx_buf_.resize(geom.num_rx);
            for (int i = 0; i < geom.num_rx; ++i)
                rx_buf_[i] = detail::unit_phasor(k * geom.rx_index(i) * geom.rx_spacing * sin_phi);
        }
        if (mode == Mode::Phased) {
            out = rx_buf_;
            return;
        }
        out.resize(rx_buf_.size() * tx_buf_.size());
        std::size_t idx = 0;
        for (const cd& bn : rx_buf_)
            for (const cd& am : tx_buf_) out[idx++] = bn * am;
    }

private:
    mutable std::vector<cd> tx_buf_, rx_buf_;
};

} // namespace nfcrb
