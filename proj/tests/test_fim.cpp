// SPDX-License-Identifier: Apache-2.0
#include "nfcrb/closedform.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <random>

using namespace nfcrb;

namespace {

using ld = long double;
const CarrierConfig carrier{};

ArrayGeometry mono(int M)
{
    ArrayGeometry g;
    g.num_tx = M;
    g.num_rx = M;
    return g;
}

ArrayGeometry bistatic(int M, int N, double R = 35.0)
{
    ArrayGeometry g;
    g.num_tx = M;
    g.num_rx = N;
    g.array_separation = R;
    return g;
}

// Gauss-Jordan inverse with partial pivoting.
template<int n>
std::array<std::array<ld, n>, n> invert(std::array<std::array<ld, n>, n> A)
{
    std::array<std::array<ld, n>, n> I{};
    for (int i = 0; i < n; ++i) I[i][i] = 1;
    for (int col = 0; col < n; ++col) {
        int piv = col;
        for (int r = col + 1; r < n; ++r)
            if (std::abs(A[r][col]) > std::abs(A[piv][col])) piv = r;
        std::swap(A[col], A[piv]);
        std::swap(I[col], I[piv]);
        ld p = A[col][col];
        for (int j = 0; j < n; ++j) {
            A[col][j] /= p;
            I[col][j] /= p;
        }
        for (int r = 0; r < n; ++r) {
            if (r == col) continue;
            ld f = A[r][col];
            for (int j = 0; j < n; ++j) {
                A[r][j] -= f * A[col][j];
                I[r][j] -= f * I[col][j];
            }
        }
    }
    return I;
}

struct Bound {
    double theta, range;
};

// Mean mu = kappa * A * g(theta, r), noise CN(0, N0 I):
// F = (2/N0) Re(J^H J) over (theta, r, Re kappa, Im kappa), at kappa = 1.
Bound oracle_crb(const std::vector<cd>& g, const std::vector<cd>& gt, const std::vector<cd>& gr, double A, double N0)
{
    std::array<std::vector<std::complex<ld>>, 4> J;
    for (std::size_t i = 0; i < g.size(); ++i) {
        J[0].emplace_back(A * gt[i].real(), A * gt[i].imag());
        J[1].emplace_back(A * gr[i].real(), A * gr[i].imag());
        J[2].emplace_back(A * g[i].real(), A * g[i].imag());
        J[3].push_back(std::complex<ld>(0, 1) * std::complex<ld>(A * g[i].real(), A * g[i].imag()));
    }
    std::array<std::array<ld, 4>, 4> F{};
    for (int a = 0; a < 4; ++a)
        for (int b = 0; b < 4; ++b) {
            std::complex<ld> s = 0;
            for (std::size_t i = 0; i < g.size(); ++i) s += std::conj(J[a][i]) * J[b][i];
            F[a][b] = 2.0L / N0 * s.real();
        }
    auto C = invert<4>(F);
    return {static_cast<double>(C[0][0]), static_cast<double>(C[1][1])};
}

// Jacobian of the observation by central differences of the values alone.
Bound fd_oracle(const ArrayGeometry& geom, TargetLocation t, Mode mode, Topology topo, const NoiseAndPowerConfig& cfg)
{
    auto val = [&](double th, double r) { return build_observation(geom, {th, r}, carrier, mode, topo).g; };
    const double ht = 1e-6, hr = 1e-6 * t.range;
    auto g = val(t.angle, t.range);
    auto tp = val(t.angle + ht, t.range), tm = val(t.angle - ht, t.range);
    auto rp = val(t.angle, t.range + hr), rm = val(t.angle, t.range - hr);
    std::vector<cd> gt(g.size()), gr(g.size());
    for (std::size_t i = 0; i < g.size(); ++i) {
        gt[i] = (tp[i] - tm[i]) / (2 * ht);
        gr[i] = (rp[i] - rm[i]) / (2 * hr);
    }
    return oracle_crb(g, gt, gr, cfg.amplitude_scale(mode, geom.num_tx), cfg.noise_psd);
}

double rel(double a, double b) { return std::abs(a - b) / std::abs(b); }

} // namespace

TEST(Fim, NumericalMatchesFiniteDifferenceOracle)
{
    auto cfg = NoiseAndPowerConfig::from_snr_db(3.0, 4.0);
    struct Case {
        ArrayGeometry g;
        TargetLocation t;
        Topology topo;
        Mode mode;
    };
    std::vector<Case> cases = {
        {mono(9), {0.3, 2.0}, Topology::Monostatic, Mode::MIMO},
        {mono(9), {-0.7, 1.5}, Topology::Monostatic, Mode::Phased},
        {mono(33), {0.0, 5.0}, Topology::Monostatic, Mode::MIMO},
        {mono(33), {1.0, 3.0}, Topology::Monostatic, Mode::Phased},
        {bistatic(9, 8), {0.2, 10.0}, Topology::BistaticNearFarTx, Mode::MIMO},
        {bistatic(15, 5), {-0.4, 4.0}, Topology::BistaticNearFarTx, Mode::MIMO},
    };
    for (const auto& c : cases) {
        Bound want = fd_oracle(c.g, c.t, c.mode, c.topo, cfg);
        CrbResult got = crb_numerical_fim(c.g, c.t, carrier, cfg, c.mode, c.topo);
        ASSERT_TRUE(got.identifiable);
        EXPECT_LT(rel(got.crb_theta, want.theta), 1e-5) << c.g.num_tx << " " << c.t.angle << " " << c.t.range;
        EXPECT_LT(rel(got.crb_range, want.range), 1e-5) << c.g.num_tx << " " << c.t.angle << " " << c.t.range;
    }
}

TEST(Fim, ExactSumsAgreeWithNumericalFim)
{
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> uth(-1.3, 1.3), ulogr(std::log(1.0), std::log(400.0));
    std::uniform_int_distribution<int> uM(1, 128);
    auto cfg = NoiseAndPowerConfig::from_snr_db(0.0, 1.0);
    for (int trial = 0; trial < 40; ++trial) {
        int M = 2 * uM(rng) + 1;
        double r = std::exp(ulogr(rng));
        TargetLocation t{uth(rng), r};
        bool bi = trial % 3 == 2;
        ArrayGeometry g = bi ? bistatic(M, 8, 2.5 * r) : mono(M);
        if (!(eps_tx(g, t) < 1.0)) continue;
        Topology topo = bi ? Topology::BistaticNearFarTx : Topology::Monostatic;
        std::vector<Mode> modes = bi ? std::vector<Mode>{Mode::MIMO} : std::vector<Mode>{Mode::MIMO, Mode::Phased};
        for (Mode mode : modes) {
            CrbResult ex = crb_exact_sum(g, t, carrier, cfg, mode, topo);
            CrbResult nf = crb_numerical_fim(g, t, carrier, cfg, mode, topo);
            ASSERT_TRUE(ex.identifiable && nf.identifiable) << M << " " << t.angle << " " << r;
            EXPECT_LT(rel(ex.crb_theta, nf.crb_theta), 1e-9) << M << " " << t.angle << " " << r;
            EXPECT_LT(rel(ex.crb_range, nf.crb_range), 1e-9) << M << " " << t.angle << " " << r;
        }
    }
}

TEST(Fim, PhasedToMimoRatioIsTwoOverM)
{
    auto cfg = NoiseAndPowerConfig::from_snr_db(-5.0, 10.0);
    for (int M : {3, 9, 65, 257})
        for (double th : {-0.9, 0.0, 0.5})
            for (double r : {4.0, 30.0}) {
                TargetLocation t{th, r};
                for (auto fn : {crb_exact_sum, crb_numerical_fim}) {
                    CrbResult mimo = fn(mono(M), t, carrier, cfg, Mode::MIMO, Topology::Monostatic);
                    CrbResult ph = fn(mono(M), t, carrier, cfg, Mode::Phased, Topology::Monostatic);
                    EXPECT_NEAR(ph.crb_theta / mimo.crb_theta, 2.0 / M, 1e-9 * 2.0 / M);
                    EXPECT_NEAR(ph.crb_range / mimo.crb_range, 2.0 / M, 1e-9 * 2.0 / M);
                }
            }
}

TEST(Fim, ScalesInverselyWithSnrAndTimeBandwidth)
{
    TargetLocation t{0.2, 6.0};
    auto lo = crb_exact_sum(mono(33), t, carrier, NoiseAndPowerConfig::from_snr(1.0, 1.0), Mode::MIMO, Topology::Monostatic);
    auto hi = crb_exact_sum(mono(33), t, carrier, NoiseAndPowerConfig::from_snr(10.0, 4.0), Mode::MIMO, Topology::Monostatic);
    EXPECT_NEAR(lo.crb_theta / hi.crb_theta, 40.0, 40.0 * 1e-12);
    EXPECT_NEAR(lo.crb_range / hi.crb_range, 40.0, 40.0 * 1e-12);
}

TEST(Fim, PhysicalConfigMatchesSnrConfig)
{
    // gamma = P |kappa|^2 / (N0 B) = 2 * 0.25 / (0.5 * 0.1) = 10, L = B T = 5
    auto phys = NoiseAndPowerConfig::from_physical(2.0, cd(0.3, 0.4), 0.5, 0.1, 50.0);
    EXPECT_NEAR(phys.snr_linear, 10.0, 1e-12);
    EXPECT_NEAR(phys.time_bandwidth, 5.0, 1e-12);
    auto snr = NoiseAndPowerConfig::from_snr(10.0, 5.0);
    TargetLocation t{-0.3, 4.0};
    for (Mode mode : {Mode::MIMO, Mode::Phased}) {
        auto a = crb_numerical_fim(mono(17), t, carrier, phys, mode, Topology::Monostatic);
        auto b = crb_numerical_fim(mono(17), t, carrier, snr, mode, Topology::Monostatic);
        EXPECT_LT(rel(a.crb_theta, b.crb_theta), 1e-12);
        EXPECT_LT(rel(a.crb_range, b.crb_range), 1e-12);
    }
}

TEST(Fim, ConfigValidation)
{
    EXPECT_THROW(NoiseAndPowerConfig::from_snr(0.0, 1.0), DomainError);
    EXPECT_THROW(NoiseAndPowerConfig::from_snr(1.0, 0.5), DomainError);
    EXPECT_THROW(NoiseAndPowerConfig::from_physical(1.0, cd(1, 0), -1.0, 1.0, 1.0), DomainError);
    EXPECT_THROW(NoiseAndPowerConfig::from_physical(1.0, cd(0, 0), 1.0, 1.0, 1.0), DomainError);
    EXPECT_TRUE(std::isinf(NoiseAndPowerConfig::from_physical(1.0, cd(1, 0), 0.0, 1.0, 1.0).snr_linear));
}

TEST(Fim, AmplitudeScaleByMode)
{
    auto cfg = NoiseAndPowerConfig::from_snr(4.0, 9.0);
    // T_p P = L gamma = 36
    EXPECT_NEAR(cfg.amplitude_scale(Mode::MIMO, 9), 2.0, 1e-15);
    EXPECT_NEAR(cfg.amplitude_scale(Mode::Phased, 9), 18.0, 1e-14);
}

TEST(Fim, SingleElementIsUnidentifiable)
{
    auto cfg = NoiseAndPowerConfig::from_snr(1.0, 1.0);
    for (Mode mode : {Mode::MIMO, Mode::Phased}) {
        EXPECT_FALSE(crb_exact_sum(mono(1), {0.3, 5.0}, carrier, cfg, mode, Topology::Monostatic).identifiable);
        EXPECT_FALSE(crb_numerical_fim(mono(1), {0.3, 5.0}, carrier, cfg, mode, Topology::Monostatic).identifiable);
    }
}

TEST(Fim, BistaticPhasedIsUnidentifiable)
{
    auto cfg = NoiseAndPowerConfig::from_snr(1.0, 1.0);
    for (double th : {-0.5, 0.0, 0.3})
        for (double r : {5.0, 18.0, 60.0}) {
            auto g = bistatic(65, 8);
            EXPECT_FALSE(crb_exact_sum(g, {th, r}, carrier, cfg, Mode::Phased, Topology::BistaticNearFarTx).identifiable);
            EXPECT_FALSE(crb_numerical_fim(g, {th, r}, carrier, cfg, Mode::Phased, Topology::BistaticNearFarTx).identifiable);
        }
}

TEST(Fim, InformationBlockInversion)
{
    CrbResult r = crb_from_information(4.0L, 9.0L, 1.0L, 2.0L, Method::ExactSumQ);
    ASSERT_TRUE(r.identifiable);
    EXPECT_NEAR(r.crb_theta, 2.0 * 9.0 / 35.0, 1e-15);
    EXPECT_NEAR(r.crb_range, 2.0 * 4.0 / 35.0, 1e-15);
    EXPECT_EQ(r.method, Method::ExactSumQ);
    EXPECT_FALSE(crb_from_information(4.0L, 9.0L, 6.0L, 1.0L, Method::ExactSumQ).identifiable);
    EXPECT_FALSE(crb_from_information(0.0L, 9.0L, 0.0L, 1.0L, Method::ExactSumQ).identifiable);
    EXPECT_FALSE(crb_from_information(-1.0L, 9.0L, 0.0L, 1.0L, Method::ExactSumQ).identifiable);
    CrbResult u = crb_from_information(1.0L, 1.0L, 1.0L, 1.0L, Method::NumericalFim);
    EXPECT_FALSE(u.identifiable);
    EXPECT_TRUE(std::isinf(u.crb_theta));
}

TEST(Fim, FresnelModelMatchesTaylorOracle)
{
    // Second-order phase -k (r - m d s + m^2 d^2 c^2 / (2r)) with analytic
    // derivatives, pushed through the standalone oracle.
    auto cfg = NoiseAndPowerConfig::from_snr(2.0, 3.0);
    const double k = carrier.wavenumber(), d = 0.0628;
    for (int M : {3, 9, 33})
        for (double th : {-0.6, 0.0, 0.4})
            for (double r : {3.0, 20.0}) {
                double s = std::sin(th), c = std::cos(th);
                std::vector<cd> a(M), at(M), ar(M);
                for (int i = 0; i < M; ++i) {
                    double m = i - (M - 1) / 2;
                    double md = m * d;
                    double phase = -k * (r - md * s + md * md * c * c / (2 * r));
                    double dth = -k * (-md * c - md * md * c * s / r);
                    double dr = -k * (1.0 - md * md * c * c / (2 * r * r));
                    a[i] = std::polar(1.0, phase);
                    at[i] = cd(0, dth) * a[i];
                    ar[i] = cd(0, dr) * a[i];
                }
                for (Mode mode : {Mode::MIMO, Mode::Phased}) {
                    std::vector<cd> g = a, gt = at, gr = ar;
                    if (mode == Mode::MIMO) {
                        g.clear();
                        gt.clear();
                        gr.clear();
                        for (int n = 0; n < M; ++n)
                            for (int m = 0; m < M; ++m) {
                                g.push_back(a[n] * a[m]);
                                gt.push_back(at[n] * a[m] + a[n] * at[m]);
                                gr.push_back(ar[n] * a[m] + a[n] * ar[m]);
                            }
                    }
                    Bound want = oracle_crb(g, gt, gr, cfg.amplitude_scale(mode, M), cfg.noise_psd);
                    // Expected closed forms, written out directly.
                    double pref = 1.0 / (2 * cfg.snr_linear * cfg.time_bandwidth);
                    double lam2 = carrier.wavelength() * carrier.wavelength(), M2 = double(M) * M;
                    double num = r * r * (15 * r * r + d * d * s * s * (M2 - 4));
                    double pdc = pi * d * d * c * c;
                    double th_cf = mode == Mode::MIMO ? pref * lam2 / (8 * pi * pi * d * d * c * c * M * (M2 - 1) / 12)
                                                      : pref * 3 * lam2 / (pi * pi * d * d * M2 * (M2 - 1) * c * c);
                    double r_cf = mode == Mode::MIMO ? pref * 6 * lam2 * num / (pdc * pdc * M * (M2 - 1) * (M2 - 4))
                                                     : pref * 12 * lam2 * num / (pdc * pdc * M2 * (M2 - 1) * (M2 - 4));
                    EXPECT_LT(rel(want.theta, th_cf), 1e-8) << M << " " << th << " " << r;
                    if (M >= 5) {
                        EXPECT_LT(rel(want.range, r_cf), 1e-8) << M << " " << th << " " << r;
                    }
                }
            }
}

TEST(Fim, PlaneWaveOracle)
{
    // Linear phase k m d sin(theta): the angle block of a (theta, kappa) FIM.
    auto cfg = NoiseAndPowerConfig::from_snr(0.5, 2.0);
    const double k = carrier.wavenumber(), d = 0.0628;
    for (int M : {3, 17, 101})
        for (double th : {-1.0, 0.0, 0.7}) {
            double c = std::cos(th);
            for (Mode mode : {Mode::MIMO, Mode::Phased}) {
                // (theta, kappa) information from sums of the phase slope
                ld A2 = std::pow((ld)cfg.amplitude_scale(mode, M), 2);
                ld sum_m2 = 0;
                for (int i = 0; i < M; ++i) sum_m2 += std::pow((ld)(i - (M - 1) / 2) * k * d * c, 2);
                ld info = mode == Mode::MIMO ? 2 * A2 * 2 * M * sum_m2 : 2 * A2 * sum_m2;
                double want = static_cast<double>(1.0L / info);
                TargetLocation t{th, 50.0};
                double got = crb_farfield_upw(mono(M), t, carrier, cfg, mode, Topology::Monostatic).crb_theta;
                EXPECT_LT(rel(got, want), 1e-12) << M << " " << th;
            }
        }
}
