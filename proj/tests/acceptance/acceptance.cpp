// SPDX-License-Identifier: Apache-2.0
// Acceptance gate: one [PASS]/[FAIL] line per criterion, non-zero exit if any
// criterion fails.
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <numbers>
#include <sstream>
#include <string>

#include "oracles.hpp"

using namespace gsdiff;
namespace fs = std::filesystem;

namespace {

int failures = 0;

void report(bool ok, const std::string& name, const std::string& detail) {
    std::cout << (ok ? "[PASS] " : "[FAIL] ") << name << ": " << detail << std::endl;
    if (!ok) ++failures;
}

std::string num(double v, int prec = 4) {
    std::ostringstream s;
    s.precision(prec);
    s << v;
    return s.str();
}

int cli(const std::string& args, const fs::path& log) {
    const std::string cmd = std::string(GSDIFF_CLI) + " " + args + " > " + log.string() + " 2>&1";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

using CsvRow = std::map<std::string, std::string>;

/// Rows of a CSV keyed by their first column.
std::map<std::string, CsvRow> read_csv(const fs::path& p) {
    std::ifstream in(p);
    std::string line;
    std::vector<std::string> header;
    std::map<std::string, CsvRow> rows;
    const auto split = [](const std::string& s) {
        std::vector<std::string> out;
        std::stringstream ss(s);
        std::string cell;
        while (std::getline(ss, cell, ',')) out.push_back(cell);
        return out;
    };
    if (!std::getline(in, line)) return rows;
    header = split(line);
    int n = 0;
    while (std::getline(in, line)) {
        const auto cells = split(line);
        CsvRow r;
        for (std::size_t i = 0; i < cells.size() && i < header.size(); ++i) r[header[i]] = cells[i];
        rows[cells.empty() ? std::to_string(n) : cells[0] + (rows.count(cells[0]) ? "#" + std::to_string(n) : "")] = r;
        ++n;
    }
    return rows;
}

std::vector<char> bytes(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

/// Relative paths of regular files under `root` matching `keep`.
template <class Pred>
std::vector<fs::path> files_under(const fs::path& root, Pred keep) {
    std::vector<fs::path> out;
    for (const auto& e : fs::recursive_directory_iterator(root)) {
        if (!e.is_regular_file()) continue;
        const fs::path rel = fs::relative(e.path(), root);
        if (keep(rel)) out.push_back(rel);
    }
    std::sort(out.begin(), out.end());
    return out;
}

/// Empty string when both trees hold the same selected files byte for byte,
/// otherwise the first difference.
template <class Pred>
std::string compare_trees(const fs::path& a, const fs::path& b, Pred keep, std::size_t* count = nullptr) {
    const auto fa = files_under(a, keep);
    const auto fb = files_under(b, keep);
    if (fa != fb) return "file lists differ (" + std::to_string(fa.size()) + " vs " + std::to_string(fb.size()) + ")";
    for (const auto& rel : fa) {
        if (bytes(a / rel) != bytes(b / rel)) return rel.string() + " differs";
    }
    if (count) *count = fa.size();
    return "";
}

struct RunOutcome {
    int exit_code = -1;
    double seconds = 0.0;
};

RunOutcome full_run(const fs::path& out, const std::string& extra) {
    fs::remove_all(out);
    fs::create_directories(out);
    const auto t0 = std::chrono::steady_clock::now();
    RunOutcome r;
    r.exit_code = cli("--set out=" + out.string() + " " + extra + " run", out.parent_path() / (out.filename().string() + ".log"));
    r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return r;
}

// --- criteria --------------------------------------------------------------------

void end_to_end(const fs::path& root) {
    const RunOutcome r = full_run(root / "run_a", "--threads 1");
    if (r.exit_code != 0) {
        report(false, "end-to-end synthetic accuracy", "pipeline exited with " + std::to_string(r.exit_code));
        return;
    }
    const auto rows = read_csv(root / "run_a" / "eval" / "metrics.csv");
    const double f1 = std::stod(rows.at("mean").at("f1"));
    const double iou = std::stod(rows.at("mean").at("iou"));
    const std::size_t views = rows.size() - 2;
    const bool ok = f1 >= 0.95 && iou >= 0.90 && r.seconds < 300.0 && views == 10;
    report(ok, "end-to-end synthetic accuracy",
           "mean F1 " + num(f1) + " (>= 0.95), mean IoU " + num(iou) + " (>= 0.90), " + std::to_string(views) +
               " held-out views, wall " + num(r.seconds, 3) + " s single-threaded (< 300 s)");
}

void gradient_check() {
    std::mt19937_64 rng(20240501);
    double worst = 0.0;
    for (int trial = 0; trial < 100; ++trial) worst = std::max(worst, oracle::gradient_check_trial(rng, 1e-5, 1e-6));
    report(worst <= 1e-4, "gradient correctness",
           "max relative error " + num(worst, 3) + " over 100 trials, 5 gaussians, 8x8 views, h = 1e-5 (<= 1e-4)");
}

void compositing_oracle() {
    std::mt19937_64 rng(77);
    double worst = 0.0;
    for (int scene = 0; scene < 50; ++scene) {
        GaussianCloud cloud = oracle::random_cloud(rng, 5 + rng() % 20);
        const TimeStamp t = scene % 2 ? TimeStamp::after : TimeStamp::before;
        if (t == TimeStamp::after) {
            std::normal_distribution<double> n(0.0, 0.05);
            for (auto& d : cloud.delta_table(t)) {
                d.d_position = Vec3(n(rng), n(rng), n(rng));
                d.d_rotation = oracle::random_rotation(rng);
                d.d_log_scale = Vec3(n(rng), n(rng), n(rng));
            }
        }
        const Camera cam = oracle::front_camera(24 + scene % 9, 20 + scene % 7, 16 + scene % 11);
        const FrameBundle fb = render_view(cloud, t, cam);
        const oracle::OracleFrame want = oracle::composite(cloud, t, cam);
        for (std::size_t p = 0; p < fb.pixel_count(); ++p)
            for (int c = 0; c < kEncodingDim; ++c) worst = std::max(worst, std::abs(fb.feature(c, p) - want.features[p][c]));
    }
    report(worst <= 1e-3, "compositing oracle equivalence",
           "max per-channel feature gap " + num(worst, 3) + " over 50 random scenes (<= 1e-3)");
}

void slerp_suite() {
    std::mt19937_64 rng(5);
    bool endpoints = true;
    double norm_err = 0.0;
    for (int i = 0; i < 1000; ++i) {
        const Quat a = oracle::random_rotation(rng);
        const Quat b = oracle::random_rotation(rng);
        endpoints = endpoints && slerp(a, b, 0.0) == a && slerp(a, b, 1.0) == b;
        const double d = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
        norm_err = std::max(norm_err, std::abs(slerp(a, b, d).norm() - 1.0));
    }
    const Quat mid = slerp(Quat::identity(), oracle::axis_angle(Vec3::UnitZ(), std::numbers::pi / 2), 0.5);
    const Quat want = oracle::axis_angle(Vec3::UnitZ(), std::numbers::pi / 4);
    const double mid_err = std::max({std::abs(mid.w - want.w), std::abs(mid.x), std::abs(mid.y), std::abs(mid.z - want.z)});
    // Across the sin(theta) = 1e-8 switch the result must not jump.
    double jump = 0.0;
    const Quat base = oracle::random_rotation(rng);
    for (double angle : {1e-9, 1.5e-8, 2e-8, 3e-8, 1e-7}) {
        const Quat other = oracle::axis_angle(Vec3(0.3, -1, 0.2), angle) * base;
        const Quat q = slerp(base, other, 0.37);
        const Quat exact = oracle::axis_angle(Vec3(0.3, -1, 0.2), 0.37 * angle) * base;
        jump = std::max(jump, std::max({std::abs(q.w - exact.w), std::abs(q.x - exact.x), std::abs(q.y - exact.y),
                                        std::abs(q.z - exact.z)}));
    }
    const bool ok = endpoints && norm_err <= 1e-9 && mid_err <= 1e-9 && jump <= 1e-6;
    report(ok, "slerp suite",
           std::string("endpoints ") + (endpoints ? "exact" : "NOT exact") + ", unit-norm error " + num(norm_err, 3) +
               " (<= 1e-9), 45-degree midpoint error " + num(mid_err, 3) + " (<= 1e-9), fallback continuity " +
               num(jump, 3) + " (<= 1e-6)");
}

void metrics_oracle() {
    std::mt19937_64 rng(31);
    int bad_counts = 0, bad_components = 0;
    for (int trial = 0; trial < 200; ++trial) {
        const int w = 8 + static_cast<int>(rng() % 40), h = 8 + static_cast<int>(rng() % 30);
        const ChangeMask p = oracle::random_mask(rng, w, h);
        const ChangeMask g = oracle::random_mask(rng, w, h);
        const PixelMetrics m = pixel_metrics(p, g);
        const oracle::Counts c = oracle::count(p, g);
        bad_counts += m.tp != c.tp || m.fp != c.fp || m.fn != c.fn;
        const auto got = connected_components(p);
        const auto want = oracle::components(p);
        bool same = got.size() == want.size();
        for (std::size_t k = 0; same && k < got.size(); ++k) {
            same = got[k].size() == want[k].size();
            for (std::size_t i = 0; same && i < got[k].size(); ++i)
                same = got[k][i].x == want[k][i].first && got[k][i].y == want[k][i].second;
        }
        bad_components += !same;
    }
    report(bad_counts == 0 && bad_components == 0, "metrics oracle equivalence",
           std::to_string(bad_counts) + " count mismatches, " + std::to_string(bad_components) +
               " component mismatches over 200 random masks (exact)");
}

void loss_unit_values() {
    std::mt19937_64 rng(3);
    const ChangeMask m = oracle::random_mask(rng, 16, 12);
    Logits uniform{16, 12, std::vector<double>(2 * 16 * 12, 0.7)};
    const double l2d_err = std::abs(loss_2d(uniform, m) - std::numbers::ln2);

    GaussianCloud cloud = oracle::random_cloud(rng, 30);
    const Encoding e = oracle::random_encoding(rng);
    for (auto& g : cloud.gaussians) g.encoding = e;
    ChangeHead head;
    head.weights.row(0) = oracle::random_encoding(rng).transpose();
    head.weights.row(1) = oracle::random_encoding(rng).transpose();
    TrainConfig cfg;
    const double l3d = loss_3d(cloud, head, cfg);

    const double tv = total_variation(std::vector<double>(3 * 16 * 12, 0.42), 16, 12);
    report(l2d_err <= 1e-9 && l3d == 0.0 && tv == 0.0, "loss unit values",
           "|L2d - ln 2| = " + num(l2d_err, 3) + " (<= 1e-9), identical-encoding L3d = " + num(l3d) +
               " (== 0), constant-image TV = " + num(tv) + " (== 0)");
}

void adversarial_gap(const fs::path& root) {
    const fs::path out = root / "adversarial";
    const RunOutcome r = full_run(out, "--set preset=adversarial");
    const int b = r.exit_code == 0 ? cli("--set out=" + out.string() + " --set preset=adversarial baseline", root / "adversarial_baseline.log") : -1;
    if (r.exit_code != 0 || b != 0) {
        report(false, "adversarial baseline gap", "pipeline exit " + std::to_string(r.exit_code) + ", baseline exit " + std::to_string(b));
        return;
    }
    const double ours = std::stod(read_csv(out / "eval" / "metrics.csv").at("mean").at("f1"));
    double best = 0.0;
    std::size_t cells = 0;
    for (const auto& [key, row] : read_csv(out / "baseline" / "grid.csv")) {
        best = std::max(best, std::stod(row.at("f1")));
        ++cells;
    }
    report(cells == 25 && ours - best >= 0.10, "adversarial baseline gap",
           "partition F1 " + num(ours) + ", best baseline F1 " + num(best) + " over " + std::to_string(cells) +
               " grid cells, gap " + num(ours - best) + " (>= 0.10)");
}

void determinism(const fs::path& root) {
    const RunOutcome b = full_run(root / "run_b", "--threads 1");
    const RunOutcome c = full_run(root / "run_c", "--threads 8");
    if (b.exit_code != 0 || c.exit_code != 0) {
        report(false, "determinism", "repeat run exit " + std::to_string(b.exit_code) + ", 8-thread run exit " +
                                         std::to_string(c.exit_code));
        return;
    }
    std::size_t all = 0, masks = 0;
    const std::string repeat = compare_trees(root / "run_a", root / "run_b", [](const fs::path&) { return true; }, &all);
    const auto mask_or_metrics = [](const fs::path& rel) {
        return rel.extension() == ".pgm" || rel.filename() == "metrics.csv";
    };
    const std::string threads = compare_trees(root / "run_a", root / "run_c", mask_or_metrics, &masks);
    report(repeat.empty() && threads.empty(), "determinism",
           (repeat.empty() ? "repeat run bit-identical over " + std::to_string(all) + " artifacts"
                           : "repeat run: " + repeat) +
               ", " +
               (threads.empty() ? "--threads 1 vs 8 identical over " + std::to_string(masks) + " masks and metrics"
                                : "threads: " + threads));
}

} // namespace

int main(int argc, char** argv) {
    const fs::path root = argc > 1 ? fs::path(argv[1]) : fs::current_path() / "acceptance_runs";
    fs::create_directories(root);
    end_to_end(root);
    gradient_check();
    compositing_oracle();
    slerp_suite();
    metrics_oracle();
    loss_unit_values();
    adversarial_gap(root);
    determinism(root);
    std::cout << (failures ? std::to_string(failures) + " criterion(s) failed" : std::string("all criteria passed"))
              << std::endl;
    return failures ? 1 : 0;
}
