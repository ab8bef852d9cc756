// SPDX-License-Identifier: Apache-2.0
#include "nfcrb/experiment.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

using namespace nfcrb;

namespace {

struct Csv {
    std::vector<std::string> comments;
    std::map<std::string, std::size_t> col;
    std::vector<std::vector<std::string>> rows;

    const std::string& at(std::size_t row, const std::string& name) const { return rows[row].at(col.at(name)); }
    double num(std::size_t row, const std::string& name) const { return std::stod(at(row, name)); }
};

std::vector<std::string> split(const std::string& line)
{
    std::vector<std::string> out;
    std::string cell;
    std::istringstream in(line);
    while (std::getline(in, cell, ',')) out.push_back(cell);
    if (!line.empty() && line.back() == ',') out.push_back("");
    return out;
}

Csv parse_csv(const std::string& text)
{
    Csv csv;
    std::istringstream in(text);
    std::string line;
    bool header = false;
    while (std::getline(in, line)) {
        if (line.rfind("#", 0) == 0) {
            csv.comments.push_back(line);
            continue;
        }
        auto cells = split(line);
        if (!header) {
            for (std::size_t i = 0; i < cells.size(); ++i) csv.col[cells[i]] = i;
            header = true;
        } else {
            EXPECT_EQ(cells.size(), csv.col.size()) << line;
            csv.rows.push_back(cells);
        }
    }
    return csv;
}

std::string run_to_string(const ExperimentConfig& cfg, RunOptions opt = {})
{
    std::ostringstream os;
    run_experiment(cfg, os, opt);
    return os.str();
}

ExperimentConfig preset(const std::string& name)
{
    auto p = find_preset(name);
    EXPECT_TRUE(p.has_value()) << name;
    return p.value_or(ExperimentConfig{});
}

std::string message_of(const std::string& text)
{
    try {
        parse_config(text);
    } catch (const ConfigError& e) {
        return e.what();
    }
    return "";
}

const char* minimal_config = R"(# a small sweep
[meta]
name = small

[scenario]
modes = MIMO
topology = monostatic
M = 9
theta_deg = 30
r_m = 10

[sweep]
axis = M
values = 9, 17

[methods]
list = ClosedForm, NumericalFim
)";

struct Shell {
    int code;
    std::string out;
};

Shell shell(const std::string& args)
{
    std::string cmd = std::string(NFCRB_CLI_PATH) + " " + args + " 2>/dev/null";
    Shell res{-1, {}};
    FILE* p = popen(cmd.c_str(), "r");
    if (!p) return res;
    char buf[4096];
    std::size_t n;
    while ((n = fread(buf, 1, sizeof buf, p)) > 0) res.out.append(buf, n);
    int status = pclose(p);
    res.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    return res;
}

std::filesystem::path temp_file(const std::string& name)
{
    return std::filesystem::temp_directory_path() / ("nfcrb_test_" + std::to_string(::getpid()) + "_" + name);
}

} // namespace

TEST(Presets, ExactlyFigTwoThroughNine)
{
    auto ps = presets();
    ASSERT_EQ(ps.size(), 8u);
    for (int i = 0; i < 8; ++i) EXPECT_EQ(ps[i].name, "fig" + std::to_string(i + 2));
}

TEST(Presets, EncodeTheFigureSetups)
{
    const std::vector<double> odd_m = {9, 17, 33, 65, 129, 257, 513, 1025};
    for (const char* n : {"fig2", "fig3"}) {
        auto c = preset(n);
        EXPECT_EQ(c.topology, Topology::Monostatic);
        EXPECT_EQ(c.range, 10.0);
        EXPECT_EQ(c.theta_deg, 30.0);
        EXPECT_EQ(c.sweep.axis, SweepAxis::M);
        EXPECT_EQ(c.sweep.points(), odd_m);
        EXPECT_EQ(c.methods.size(), 6u);
    }
    for (const char* n : {"fig4", "fig5"}) {
        auto c = preset(n);
        EXPECT_EQ(c.num_tx, 1024);
        EXPECT_EQ(c.range, 10.0);
        EXPECT_EQ(c.sweep.axis, SweepAxis::Theta);
        auto pts = c.sweep.points();
        EXPECT_DOUBLE_EQ(pts.front(), -75.0);
        EXPECT_DOUBLE_EQ(pts.back(), 75.0);
    }
    for (const char* n : {"fig6", "fig7"}) {
        auto c = preset(n);
        EXPECT_EQ(c.num_tx, 1024);
        EXPECT_EQ(c.theta_deg, 30.0);
        EXPECT_EQ(c.sweep.axis, SweepAxis::Range);
        auto pts = c.sweep.points();
        EXPECT_DOUBLE_EQ(pts.front(), 2.0);
        EXPECT_NEAR(pts.back(), 2000.0, 1e-9);
    }
    for (const char* n : {"fig8", "fig9"}) {
        auto c = preset(n);
        EXPECT_EQ(c.topology, Topology::BistaticNearFarTx);
        EXPECT_EQ(c.num_rx, 8);
        EXPECT_EQ(c.theta_deg, 0.0);
        EXPECT_EQ(c.range, 18.0);
        EXPECT_EQ(c.array_separation, 35.0);
        EXPECT_TRUE(c.mc.enabled);
        EXPECT_EQ(c.mc.trials, 500);
        EXPECT_EQ(c.sweep.points(), odd_m);
    }
    for (const auto& p : presets()) {
        EXPECT_EQ(p.carrier_freq, 2.37e9);
        EXPECT_EQ(p.tx_spacing, 0.0628);
        EXPECT_EQ(p.snr_db, 0.0);
        EXPECT_EQ(p.time_bandwidth, 1.0);
        EXPECT_NO_THROW(p.validate()) << p.name;
    }
}

TEST(Config, PresetsRoundTripThroughText)
{
    for (const auto& p : presets()) {
        std::string text = serialize_config(p);
        ExperimentConfig back = parse_config(text);
        EXPECT_EQ(back, p) << p.name;
        EXPECT_EQ(serialize_config(back), text);
    }
}

TEST(Config, MinimalFileUsesDefaults)
{
    auto c = parse_config(std::string(minimal_config));
    EXPECT_EQ(c.name, "small");
    EXPECT_EQ(c.num_tx, 9);
    EXPECT_EQ(c.sweep.kind, SweepKind::List);
    EXPECT_EQ(c.sweep.values, (std::vector<double>{9, 17}));
    EXPECT_EQ(c.methods, (std::vector<Method>{Method::ClosedForm, Method::NumericalFim}));
    EXPECT_EQ(c.carrier_freq, 2.37e9);
    EXPECT_EQ(c.rx_spacing, 0.0628);
    EXPECT_FALSE(c.mc.enabled);
}

TEST(Config, OverridesReplaceFileValues)
{
    auto c = parse_config(std::string(minimal_config), {"scenario.r_m=25", "theta_deg=-15", "sweep.start=3",
                                                        "sweep.stop=7", "sweep.step=2"});
    EXPECT_EQ(c.range, 25.0);
    EXPECT_EQ(c.theta_deg, -15.0);
    EXPECT_EQ(c.sweep.kind, SweepKind::Linear);
    EXPECT_EQ(c.sweep.points(), (std::vector<double>{3, 5, 7}));

    EXPECT_THROW(parse_config(std::string(minimal_config), {"bogus=1"}), ConfigError);
    EXPECT_THROW(parse_config(std::string(minimal_config), {"no_equals_sign"}), ConfigError);
    EXPECT_NO_THROW(parse_config(std::string(minimal_config), {"enabled=false"}));
}

TEST(Config, ErrorsNameTheLine)
{
    std::string dup = std::string(minimal_config) + "list = Taylor\n";
    EXPECT_NE(message_of(dup).find("line 18"), std::string::npos) << message_of(dup);
    EXPECT_NE(message_of(dup).find("duplicate"), std::string::npos);

    std::string unknown = "[scenario]\nM = 9\nfrobnicate = 3\n";
    EXPECT_NE(message_of(unknown).find("line 3"), std::string::npos) << message_of(unknown);

    std::string bad_value = "[scenario]\n\nM = nine\n";
    EXPECT_NE(message_of(bad_value).find("line 3"), std::string::npos) << message_of(bad_value);

    EXPECT_NE(message_of("M = 9\n").find("line 1"), std::string::npos);
    EXPECT_NE(message_of("[scenario\n").find("line 1"), std::string::npos);
}

TEST(Config, ValidationRejectsInconsistentRequests)
{
    EXPECT_THROW(parse_config("[scenario]\ntopology = bistatic\nR_m = 35\n[methods]\nlist = Taylor\n"), ConfigError);
    EXPECT_THROW(parse_config("[scenario]\ntopology = bistatic\n"), ConfigError);
    EXPECT_THROW(parse_config("[scenario]\nR_m = 4\n"), ConfigError);
    EXPECT_THROW(parse_config("[scenario]\ntheta_deg = 95\n"), ConfigError);
    EXPECT_THROW(parse_config("[scenario]\nL = 0.5\n"), ConfigError);
    EXPECT_THROW(parse_config("[sweep]\nvalues = 9\nstep = 2\n"), ConfigError);
    EXPECT_THROW(parse_config("[sweep]\nstart = 1\nstop = 2\n"), ConfigError);
    EXPECT_THROW(parse_config("[sweep]\nstart = 1\nstop = 2\nfactor = 0.5\n"), ConfigError);
    EXPECT_THROW(parse_config("[scenario]\ntopology = bistatic\nR_m = 35\nmodes = Phased\n[montecarlo]\nenabled = true\n"),
                 ConfigError);
    EXPECT_THROW(parse_config("[scenario]\ntopology = bistatic\nR_m = 35\ntheta_deg = 10\n[methods]\nlist = Asymptotic\n"),
                 ConfigError);
}

TEST(Runner, HeaderAndUnits)
{
    auto c = parse_config(std::string(minimal_config));
    Csv csv = parse_csv(run_to_string(c));
    for (const char* name : {"method", "mode", "topology", "M", "N", "d_tx_m", "d_rx_m", "R_m", "theta_rad", "r_m",
                             "snr_db", "L", "crb_theta_rad2", "crb_r_m2", "identifiable", "warnings"})
        EXPECT_TRUE(csv.col.count(name)) << name;
    EXPECT_EQ(csv.col.size(), 16u);
    ASSERT_EQ(csv.rows.size(), 4u);
    EXPECT_EQ(csv.at(0, "method"), "ClosedForm");
    EXPECT_EQ(csv.at(1, "method"), "NumericalFim");
    EXPECT_EQ(csv.at(2, "M"), "17");
    EXPECT_NEAR(csv.num(0, "theta_rad"), pi / 6, 1e-15);
    bool has_units = false;
    for (const auto& line : csv.comments) has_units |= line.find("rad^2") != std::string::npos;
    EXPECT_TRUE(has_units);

    Csv db = parse_csv(run_to_string(c, {true, 0}));
    EXPECT_TRUE(db.col.count("crb_theta_db"));
    EXPECT_NEAR(db.num(1, "crb_theta_db"), 10 * std::log10(csv.num(1, "crb_theta_rad2")), 1e-12);
}

TEST(Runner, HeaderDescribesTheSweepGrid)
{
    auto has = [](const Csv& csv, const std::string& text) {
        for (const auto& line : csv.comments)
            if (line.find(text) != std::string::npos) return true;
        return false;
    };
    EXPECT_TRUE(has(parse_csv(run_to_string(preset("fig4"))), "-75 to 75 step 5"));
    EXPECT_TRUE(has(parse_csv(run_to_string(preset("fig2"))), "values 9, 17, 33, 65, 129, 257, 513, 1025"));
    EXPECT_TRUE(has(parse_csv(run_to_string(preset("fig6"))), "2 to 2000 factor"));
}

TEST(Runner, SeventeenSignificantDigits)
{
    auto c = parse_config(std::string(minimal_config));
    Csv csv = parse_csv(run_to_string(c));
    CrbResult ref = crb_numerical_fim(make_point(c, 9).geom, {pi / 6, 10.0}, CarrierConfig{},
                                      NoiseAndPowerConfig::from_snr_db(0.0, 1.0), Mode::MIMO, Topology::Monostatic);
    EXPECT_EQ(csv.num(1, "crb_theta_rad2"), ref.crb_theta);
    EXPECT_EQ(csv.num(1, "crb_r_m2"), ref.crb_range);
}

TEST(Runner, EmptySweepGivesHeaderOnly)
{
    auto c = parse_config(std::string(minimal_config), {"sweep.values="});
    std::string out = run_to_string(c);
    Csv csv = parse_csv(out);
    EXPECT_TRUE(csv.rows.empty());
    EXPECT_EQ(csv.col.size(), 16u);
}

TEST(Runner, EvenMIsRoundedWithAWarning)
{
    auto c = parse_config(std::string(minimal_config), {"sweep.values=8,9"});
    Csv csv = parse_csv(run_to_string(c));
    ASSERT_EQ(csv.rows.size(), 4u);
    EXPECT_EQ(csv.at(0, "M"), "9");
    EXPECT_NE(csv.at(0, "warnings").find("rounded_to_odd"), std::string::npos);
    EXPECT_EQ(csv.at(2, "warnings").find("rounded_to_odd"), std::string::npos);
    EXPECT_EQ(csv.at(0, "crb_theta_rad2"), csv.at(2, "crb_theta_rad2"));
}

TEST(Runner, UnidentifiableIsWrittenAsInf)
{
    auto c = parse_config(std::string(minimal_config),
                          {"topology=bistatic", "R_m=35", "modes=Phased", "list=ClosedForm,NumericalFim"});
    Csv csv = parse_csv(run_to_string(c));
    ASSERT_FALSE(csv.rows.empty());
    for (std::size_t i = 0; i < csv.rows.size(); ++i) {
        EXPECT_EQ(csv.at(i, "identifiable"), "false");
        EXPECT_EQ(csv.at(i, "crb_r_m2"), "inf");
    }
}

TEST(Runner, FigTwoClosedFormTracksNumericalFim)
{
    Csv csv = parse_csv(run_to_string(preset("fig2")));
    std::map<std::pair<std::string, std::string>, std::pair<double, double>> closed;
    for (std::size_t i = 0; i < csv.rows.size(); ++i)
        if (csv.at(i, "method") == "ClosedForm")
            closed[{csv.at(i, "mode"), csv.at(i, "M")}] = {csv.num(i, "crb_theta_rad2"), csv.num(i, "crb_r_m2")};
    int compared = 0;
    for (std::size_t i = 0; i < csv.rows.size(); ++i) {
        if (csv.at(i, "method") != "NumericalFim") continue;
        auto [ct, cr] = closed.at({csv.at(i, "mode"), csv.at(i, "M")});
        double ft = csv.num(i, "crb_theta_rad2"), fr = csv.num(i, "crb_r_m2");
        EXPECT_LT(std::abs(ct - ft) / ft, 1e-2) << csv.at(i, "mode") << " M = " << csv.at(i, "M");
        EXPECT_LT(std::abs(cr - fr) / fr, 1e-2) << csv.at(i, "mode") << " M = " << csv.at(i, "M");
        ++compared;
    }
    EXPECT_EQ(compared, 16);
}

TEST(Runner, AllNonRandomPresetsRun)
{
    for (const char* n : {"fig3", "fig4", "fig5", "fig6", "fig7"}) {
        Csv csv = parse_csv(run_to_string(preset(n)));
        auto c = preset(n);
        EXPECT_EQ(csv.rows.size(), c.sweep.points().size() * c.modes.size() * c.methods.size()) << n;
        for (std::size_t i = 0; i < csv.rows.size(); ++i) {
            if (csv.at(i, "identifiable") != "true") continue;
            EXPECT_TRUE(std::isfinite(csv.num(i, "crb_theta_rad2"))) << n << " row " << i;
        }
    }
}

// The full bistatic preset: every row's RMSE must sit above the bound up to
// the sampling error of a K-trial variance estimate.
TEST(Runner, FigEightRmseAboveBound)
{
    auto c = preset("fig8");
    Csv csv = parse_csv(run_to_string(c));
    ASSERT_TRUE(csv.col.count("rmse_theta_rad"));
    const double slack = 1.0 - 2.0 / std::sqrt(static_cast<double>(c.mc.trials));
    int checked = 0;
    for (std::size_t i = 0; i < csv.rows.size(); ++i) {
        if (csv.at(i, "method") != "NumericalFim") continue;
        double rt = csv.num(i, "rmse_theta_rad"), rr = csv.num(i, "rmse_r_m");
        EXPECT_GE(rt * rt, csv.num(i, "crb_theta_rad2") * slack) << "M = " << csv.at(i, "M");
        EXPECT_GE(rr * rr, csv.num(i, "crb_r_m2") * slack) << "M = " << csv.at(i, "M");
        ++checked;
    }
    EXPECT_EQ(checked, 8);
}

TEST(Runner, DeterministicAcrossRunsAndThreads)
{
    auto c = preset("fig9");
    c.sweep.values = {17, 65};
    c.mc.trials = 40;
    std::string a = run_to_string(c, {false, 1});
    EXPECT_EQ(a, run_to_string(c, {false, 1}));
    EXPECT_EQ(a, run_to_string(c, {false, 3}));
    c.mc.seed = 7;
    EXPECT_NE(a, run_to_string(c, {false, 1}));

    auto f4 = preset("fig4");
    EXPECT_EQ(run_to_string(f4, {false, 1}), run_to_string(f4, {false, 4}));
}

TEST(Cli, ListPresets)
{
    Shell s = shell("list-presets");
    EXPECT_EQ(s.code, 0);
    for (int i = 2; i <= 9; ++i) EXPECT_NE(s.out.find("fig" + std::to_string(i)), std::string::npos);
}

TEST(Cli, PresetMatchesLibraryAndWritesFiles)
{
    Shell s = shell("preset fig3");
    EXPECT_EQ(s.code, 0);
    EXPECT_EQ(s.out, run_to_string(preset("fig3")));

    auto out = temp_file("fig5.csv");
    Shell f = shell("preset fig5 --db --out " + out.string());
    EXPECT_EQ(f.code, 0);
    EXPECT_TRUE(f.out.empty());
    std::ifstream in(out);
    std::stringstream content;
    content << in.rdbuf();
    EXPECT_EQ(content.str(), run_to_string(preset("fig5"), {true, 0}));
    std::filesystem::remove(out);
}

TEST(Cli, RunConfigWithOverridesAndSeed)
{
    auto cfg = temp_file("small.cfg");
    {
        std::ofstream f(cfg);
        f << minimal_config;
    }
    Shell s = shell("run --config " + cfg.string() + " --set r_m=12 --set sweep.values=33");
    EXPECT_EQ(s.code, 0);
    Csv csv = parse_csv(s.out);
    ASSERT_EQ(csv.rows.size(), 2u);
    EXPECT_EQ(csv.at(0, "r_m"), "12");
    EXPECT_EQ(csv.at(0, "M"), "33");

    Shell seeded = shell("preset fig8 --set sweep.values=17 --set K=5 --seed 99");
    EXPECT_EQ(seeded.code, 0);
    EXPECT_NE(seeded.out.find("seed = 99"), std::string::npos);

    Shell printed = shell("preset fig8 --print-config --set K=5");
    EXPECT_EQ(printed.code, 0);
    EXPECT_EQ(parse_config(printed.out).mc.trials, 5);
    std::filesystem::remove(cfg);
}

TEST(Cli, ExitCodes)
{
    EXPECT_EQ(shell("preset nonesuch").code, 2);
    EXPECT_EQ(shell("run --config /nonexistent/file.cfg").code, 2);
    EXPECT_EQ(shell("preset fig2 --set bogus=1").code, 2);
    EXPECT_EQ(shell("preset fig2 --set theta_deg=120").code, 2);
    EXPECT_EQ(shell("frobnicate").code, 2);
    EXPECT_EQ(shell("").code, 2);

    // A Capon run with too few snapshots for the covariance to be invertible
    // without loading is a numerical failure, not a config error.
    EXPECT_EQ(shell("preset fig8 --set sweep.values=9 --set K=2 --set estimator=Capon --set snapshots=2 "
                    "--set loading=0")
                  .code,
              3);
}
