// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "nfcrb/fim.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

namespace nfcrb {

// ---------------------------------------------------------------------------
// Seeding. Every trial (and every snapshot inside a trial) draws from its own
// generator seeded by a hash of (master, index), so results do not depend on
// which thread ran what.

inline std::uint64_t splitmix64(std::uint64_t x)
{
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

inline std::uint64_t substream_seed(std::uint64_t master, std::uint64_t index)
{
    return splitmix64(splitmix64(master) ^ (index * 0xd1b54a32d192ed03ULL + 1));
}

class ComplexGaussian {
public:
    explicit ComplexGaussian(std::uint64_t seed) : gen_(seed) {}

    // Circular complex normal with E|z|^2 = variance.
    cd operator()(double variance)
    {
        double sd = std::sqrt(0.5 * variance);
        double re = normal_(gen_), im = normal_(gen_);
        return {sd * re, sd * im};
    }

private:
    std::mt19937_64 gen_;
    std::normal_distribution<double> normal_{0.0, 1.0};
};

// ---------------------------------------------------------------------------

enum class WaveformFamily { OrthogonalCodes, SinglePulse };

struct WaveformConfig {
    int num_samples_per_cpi = 16;
    double cpi_duration = 1.0;   // s
    double bandwidth = 1.0;      // Hz
    WaveformFamily waveform_family = WaveformFamily::OrthogonalCodes;
    // Optional user code set, one row per transmit element. Empty means
    // Sylvester-Hadamard rows.
    std::vector<std::vector<cd>> custom_codes;

    double time_bandwidth() const { return bandwidth * cpi_duration; }

    void validate() const
    {
        if (num_samples_per_cpi < 1) throw ConfigError("num_samples_per_cpi must be >= 1");
        if (!(cpi_duration > 0.0) || !(bandwidth > 0.0)) throw ConfigError("CPI and bandwidth must be positive");
        if (!(time_bandwidth() >= 1.0)) throw ConfigError("waveform needs B * T_p >= 1");
    }
};

struct Snapshot {
    std::vector<cd> y;
    double theta = 0.0;
    double range = 0.0;
    std::uint64_t seed = 0;
};

// Extra knobs for the simulators. The path-loss factor (ref/r)(ref/l) is off
// by default because the bounds treat kappa as a fixed constant.
struct SimOptions {
    bool path_loss = false;
    double reference_distance = 1.0;
    int delay_chips = 0;          // true round-trip delay, in samples
    int filter_delay_chips = 0;   // delay assumed by the matched filter
};

namespace detail {

inline double path_loss_factor(const SimOptions& opt, double r, double l)
{
    if (!opt.path_loss) return 1.0;
    return opt.reference_distance * opt.reference_distance / (r * l);
}

inline bool is_power_of_two(int n) { return n > 0 && (n & (n - 1)) == 0; }

inline void check_chain_cpi(const WaveformConfig& wf, const NoiseAndPowerConfig& cfg)
{
    if (std::abs(wf.cpi_duration - cfg.cpi_duration()) > 1e-12 * cfg.cpi_duration())
        throw ConfigError("waveform CPI does not match the power/noise configuration");
}

} // namespace detail

// Rows 0..M-1 of the Sylvester-Hadamard matrix of order Ns, entries +-1, so
// (1/Ns) sum_k s_m[k] conj(s_j[k]) = delta_mj.
inline std::vector<std::vector<cd>> hadamard_codes(int M, int Ns)
{
    if (!detail::is_power_of_two(Ns)) throw ConfigError("Hadamard codes need a power-of-two length");
    if (M > Ns) throw ConfigError("need at least M codes: M = " + std::to_string(M) + ", Ns = " + std::to_string(Ns));
    std::vector<std::vector<cd>> out(M, std::vector<cd>(Ns));
    for (int m = 0; m < M; ++m)
        for (int k = 0; k < Ns; ++k) out[m][k] = (std::popcount(static_cast<unsigned>(m & k)) & 1) ? -1.0 : 1.0;
    return out;
}

inline void check_orthogonal_codes(const std::vector<std::vector<cd>>& codes, int M, int Ns)
{
    if (static_cast<int>(codes.size()) < M) throw ConfigError("fewer codes than transmit elements");
    for (int m = 0; m < M; ++m)
        if (static_cast<int>(codes[m].size()) != Ns) throw ConfigError("code length must equal num_samples_per_cpi");
    const double tol = 1e-12;
    for (int m = 0; m < M; ++m)
        for (int j = m; j < M; ++j) {
            cd acc = 0;
            for (int k = 0; k < Ns; ++k) acc += codes[m][k] * std::conj(codes[j][k]);
            acc /= static_cast<double>(Ns);
            double want = m == j ? 1.0 : 0.0;
            if (std::abs(acc - want) > tol)
                throw ConfigError("code set is not orthonormal (rows " + std::to_string(m) + ", " + std::to_string(j) + ")");
        }
}

// y = rho g + n with n ~ CN(0, N0 I).
inline Snapshot synth_snapshot(const ObservationVector& obs, const NoiseAndPowerConfig& cfg, std::uint64_t seed,
                               double theta = 0.0, double range = 0.0)
{
    const cd rho = cfg.rho(obs.mode, obs.num_tx);
    Snapshot out;
    out.theta = theta;
    out.range = range;
    out.seed = seed;
    out.y.resize(obs.length());
    ComplexGaussian noise(seed);
    for (std::size_t i = 0; i < obs.length(); ++i) {
        out.y[i] = rho * obs.g[i];
        if (cfg.noise_psd > 0.0) out.y[i] += noise(cfg.noise_psd);
    }
    return out;
}

namespace detail {

// Receive-side response for the chain demos: the transmit array itself when
// monostatic, otherwise the far-field receive vector.
inline std::vector<cd> chain_receive_vector(const ArrayGeometry& geom, const TargetLocation& tgt,
                                            const CarrierConfig& carrier, const std::vector<cd>& a)
{
    if (geom.monostatic()) return a;
    return rx_steering_far(geom, tgt, carrier).values;
}

// Sample-level receive record: z_n[k] = kappa b_n u[k - tau] + w_n[k], with
// white noise of variance N0/dt per sample, then the matched filter
// (1/sqrt(T_p)) sum_k z_n[k + alpha] conj(f[k]) dt. `tx_at_target[k]` is
// sum_m a_m x_m[k], the field radiated toward the target.
inline std::vector<cd> receive_and_filter(const std::vector<cd>& b, cd kappa,
                                          const std::vector<cd>& tx_at_target,
                                          const std::vector<std::vector<cd>>& filters, const WaveformConfig& wf,
                                          const NoiseAndPowerConfig& cfg, const SimOptions& opt, std::uint64_t seed)
{
    const int Ns = wf.num_samples_per_cpi;
    if (opt.delay_chips < 0 || opt.filter_delay_chips < 0) throw ConfigError("delays must be >= 0");
    const int record = Ns + std::max(opt.delay_chips, opt.filter_delay_chips);
    const double dt = wf.cpi_duration / Ns;
    const double sample_var = cfg.noise_psd / dt;
    const double norm = dt / std::sqrt(wf.cpi_duration);
    const std::size_t N = b.size(), K = filters.size();
    std::vector<cd> out(N * K);
    ComplexGaussian noise(seed);
    std::vector<cd> z(record);
    for (std::size_t n = 0; n < N; ++n) {
        for (int k = 0; k < record; ++k) {
            int src = k - opt.delay_chips;
            z[k] = (src >= 0 && src < Ns) ? kappa * b[n] * tx_at_target[src] : cd(0.0);
            if (cfg.noise_psd > 0.0) z[k] += noise(sample_var);
        }
        for (std::size_t j = 0; j < K; ++j) {
            cd acc = 0;
            for (int k = 0; k < Ns; ++k) acc += z[k + opt.filter_delay_chips] * std::conj(filters[j][k]);
            out[n * K + j] = acc * norm;
        }
    }
    return out;
}

} // namespace detail

// MIMO transmit chain: x_m(t) = sqrt(P/M) s_m(t), one matched filter per code
// on every receive element. With orthonormal codes the output collapses to
// rho (b kron a) + n. Codes have ideal zero cross-correlation at zero lag
// only; a filter delay that leaves the CPI window sees pure noise.
inline Snapshot mimo_chain_demo(const ArrayGeometry& geom, const TargetLocation& tgt, const CarrierConfig& carrier,
                                const WaveformConfig& wf, const NoiseAndPowerConfig& cfg, std::uint64_t seed,
                                const SimOptions& opt = {})
{
    geom.validate();
    wf.validate();
    cfg.validate();
    detail::check_chain_cpi(wf, cfg);
    const int M = geom.num_tx, Ns = wf.num_samples_per_cpi;
    if (M > 16 || (!geom.monostatic() && geom.num_rx > 16)) throw ConfigError("chain demo is limited to M, N <= 16");
    if (wf.waveform_family != WaveformFamily::OrthogonalCodes) throw ConfigError("MIMO chain needs orthogonal codes");
    auto codes = wf.custom_codes.empty() ? hadamard_codes(M, Ns) : wf.custom_codes;
    check_orthogonal_codes(codes, M, Ns);

    const std::vector<cd> a = tx_steering(geom, tgt, carrier).values;
    const std::vector<cd> b = detail::chain_receive_vector(geom, tgt, carrier, a);
    const double amp = std::sqrt(cfg.total_power / M);
    std::vector<cd> tx(Ns, 0.0);
    for (int k = 0; k < Ns; ++k)
        for (int m = 0; m < M; ++m) tx[k] += a[m] * amp * codes[m][k];

    const double l = geom.monostatic() ? tgt.range : bistatic_transform(geom, tgt).l;
    const cd kappa = cfg.reflection_coeff * detail::path_loss_factor(opt, tgt.range, l);
    codes.resize(M);

    Snapshot out;
    out.theta = tgt.angle;
    out.range = tgt.range;
    out.seed = seed;
    out.y = detail::receive_and_filter(b, kappa, tx, codes, wf, cfg, opt, seed);
    return out;
}

// Phased transmit chain: one waveform s(t) steered by sqrt(P/M) conj(a(r', theta')).
// At the matched steering the output is kappa sqrt(T_p M P) b + n; away from
// it the amplitude drops by |a^T conj(a')| / M.
inline Snapshot phased_chain_demo(const ArrayGeometry& geom, const TargetLocation& tgt, const CarrierConfig& carrier,
                                  const WaveformConfig& wf, const NoiseAndPowerConfig& cfg,
                                  const TargetLocation& steer_at, std::uint64_t seed, const SimOptions& opt = {})
{
    geom.validate();
    wf.validate();
    cfg.validate();
    detail::check_chain_cpi(wf, cfg);
    const int M = geom.num_tx, Ns = wf.num_samples_per_cpi;
    std::vector<cd> pulse(Ns, 1.0);
    if (!wf.custom_codes.empty()) {
        pulse = wf.custom_codes.front();
        check_orthogonal_codes({pulse}, 1, Ns);
    }

    const std::vector<cd> a = tx_steering(geom, tgt, carrier).values;
    const std::vector<cd> a_steer = tx_steering(geom, steer_at, carrier).values;
    const std::vector<cd> b = detail::chain_receive_vector(geom, tgt, carrier, a);
    const double amp = std::sqrt(cfg.total_power / M);
    cd gain = 0;
    for (int m = 0; m < M; ++m) gain += a[m] * std::conj(a_steer[m]);
    std::vector<cd> tx(Ns);
    for (int k = 0; k < Ns; ++k) tx[k] = amp * gain * pulse[k];

    const double l = geom.monostatic() ? tgt.range : bistatic_transform(geom, tgt).l;
    const cd kappa = cfg.reflection_coeff * detail::path_loss_factor(opt, tgt.range, l);

    Snapshot out;
    out.theta = tgt.angle;
    out.range = tgt.range;
    out.seed = seed;
    out.y = detail::receive_and_filter(b, kappa, tx, {pulse}, wf, cfg, opt, seed);
    return out;
}

} // namespace nfcrb
