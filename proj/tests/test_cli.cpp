// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>

#include "gsdiff/gsdiff.hpp"

using namespace gsdiff;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
    const fs::path d = fs::temp_directory_path() / ("gsdiff_cli_" + name);
    fs::remove_all(d);
    fs::create_directories(d);
    return d;
}

int run(const std::string& args) {
    const std::string cmd = std::string(GSDIFF_CLI) + " " + args + " > /dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string quick(const fs::path& out) {
    return "--set out=" + out.string() + " --set poses.per_epoch=4 --set poses.n_interp=1 --set eval.views=2 "
           "--set train.iterations=5 --set detect.persist_k=1";
}

} // namespace

TEST(Cli, ExitCodes) {
    const fs::path d = scratch("codes");
    EXPECT_EQ(run("--set out=" + d.string() + " --set bogus=1 generate"), 2);
    EXPECT_EQ(run("--set out=" + d.string() + " --set train.iterations=-1 generate"), 2);
    EXPECT_EQ(run("--set out=" + d.string() + " detect"), 3); // nothing generated yet
    std::ofstream(d / "scene.gsdf") << "GSDF garbage";
    EXPECT_EQ(run("--set out=" + d.string() + " detect"), 3);
    EXPECT_NE(run("nosuchcommand"), 0);
}

TEST(Cli, NoChangePresetDetectsNothing) {
    const fs::path d = scratch("nochange");
    ASSERT_EQ(run(quick(d) + " --set preset=nochange generate"), 0);
    ASSERT_EQ(run(quick(d) + " --set preset=nochange detect"), 0);
    std::ifstream in(d / "detect" / "changed_ids.json");
    const auto j = nlohmann::json::parse(in);
    EXPECT_TRUE(j.at("changed_ids").empty());
    EXPECT_EQ(j.at("poses_1").get<int>(), 4 + 3);
}

TEST(Cli, RendersOffTrajectoryPose) {
    const fs::path d = scratch("novel");
    ASSERT_EQ(run(quick(d) + " generate"), 0);
    ASSERT_EQ(run(quick(d) + " detect"), 0);
    ASSERT_EQ(run(quick(d) + " train"), 0);
    PoseSequence one;
    one.poses.push_back(look_at(Vec3(-1.5, 1.8, 2.5), Vec3::Zero()));
    save_poses(one, d / "novel.json");
    ASSERT_EQ(run(quick(d) + " render --pose " + (d / "novel.json").string() + " --epoch after --out-dir " +
                  (d / "novel").string()),
              0);
    const ChangeMask m = read_mask(d / "novel" / "change_after.pgm");
    EXPECT_EQ(m.width, 64);
    EXPECT_EQ(m.height, 64);
    EXPECT_TRUE(fs::exists(d / "novel" / "image_after.ppm"));
    EXPECT_TRUE(fs::exists(d / "novel" / "features_after.gsfm"));
    EXPECT_EQ(run(quick(d) + " render --pose " + (d / "novel.json").string() + " --index 3"), 2);
}

TEST(Cli, EvalOnIdenticalDirectoriesIsPerfect) {
    const fs::path d = scratch("eval");
    fs::create_directories(d / "m");
    ChangeMask m = ChangeMask::empty(8, 8);
    m.mask[9] = m.mask[10] = 1;
    write_mask(d / "m" / "view_000.pgm", m);
    ASSERT_EQ(run("--set out=" + d.string() + " eval --pred " + (d / "m").string() + " --gt " + (d / "m").string() +
                  " --csv " + (d / "metrics.csv").string()),
              0);
    std::ifstream in(d / "metrics.csv");
    const std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    EXPECT_NE(text.find("mean"), std::string::npos) << text;
}
