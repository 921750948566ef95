// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <numbers>

#include "oracles.hpp"

using namespace gsdiff;

namespace {

Gaussian unit_gaussian() {
    Gaussian g;
    g.position = Vec3(0.5, -0.25, 3.0);
    g.scale = Vec3(1.0, 1.0, 1.0);
    g.rotation = oracle::axis_angle(Vec3(1, 2, 3), 0.7);
    g.opacity = 0.8;
    g.color = Vec3(0.1, 0.2, 0.3);
    return g;
}

} // namespace

TEST(Deform, ZeroDeltaIsIdentity) {
    const Gaussian g = unit_gaussian();
    EXPECT_EQ(apply_delta(g, DeformationDelta{}), g);
}

TEST(Deform, PositionAndScale) {
    const Gaussian g = unit_gaussian();
    DeformationDelta d;
    d.d_position = Vec3(1, 2, 3);
    d.d_log_scale = Vec3(std::log(2.0), 0, 0);
    const Gaussian out = apply_delta(g, d);
    EXPECT_TRUE(out.position.isApprox(g.position + Vec3(1, 2, 3), 1e-15));
    EXPECT_NEAR(out.scale.x(), 2.0, 1e-12);
    EXPECT_NEAR(out.scale.y(), 1.0, 1e-15);
    EXPECT_NEAR(out.scale.z(), 1.0, 1e-15);
}

TEST(Deform, RotationComposesOnTheLeft) {
    const Gaussian g = unit_gaussian();
    DeformationDelta d;
    d.d_rotation = oracle::axis_angle(Vec3::UnitZ(), 0.4);
    const Gaussian out = apply_delta(g, d);
    const Mat3 want = oracle::rotation_matrix(d.d_rotation) * oracle::rotation_matrix(g.rotation);
    EXPECT_TRUE(oracle::rotation_matrix(out.rotation).isApprox(want, 1e-12));
}

TEST(Deform, MissingTableIsAConfigError) {
    GaussianCloud c;
    c.gaussians.push_back(unit_gaussian());
    c.partition.push_back(PartitionLabel::unassigned);
    EXPECT_THROW(deform(c, TimeStamp::after), ConfigError);
}

TEST(Generator, RejectsDegenerateSpecs) {
    SceneSpec s;
    s.n_instances = 0;
    EXPECT_THROW(generate_synthetic_scene(s, 1), ValidationError);
    s = SceneSpec{};
    s.gaussians_per_instance = 0;
    EXPECT_THROW(generate_synthetic_scene(s, 1), ValidationError);
}

TEST(Generator, DeterministicForSeed) {
    const auto a = generate_synthetic_scene(SceneSpec{}, 11);
    const auto b = generate_synthetic_scene(SceneSpec{}, 11);
    const auto c = generate_synthetic_scene(SceneSpec{}, 12);
    EXPECT_EQ(a.cloud.gaussians, b.cloud.gaussians);
    EXPECT_EQ(a.cloud.deltas, b.cloud.deltas);
    EXPECT_NE(a.cloud.gaussians, c.cloud.gaussians);
}

TEST(Generator, DefaultSceneLayout) {
    const auto s = generate_synthetic_scene(SceneSpec{}, 3);
    EXPECT_EQ(s.cloud.size(), 64u + 4u * 20u);
    EXPECT_EQ(s.changed_ids, (std::set<InstanceId>{1}));
    std::map<InstanceId, int> per;
    for (const auto& g : s.cloud.gaussians) ++per[g.instance_id];
    EXPECT_EQ(per[0], 64);
    for (InstanceId k = 1; k <= 4; ++k) EXPECT_EQ(per[k], 20);
    const DeltaTable& after = s.cloud.delta_table(TimeStamp::after);
    for (std::size_t i = 0; i < s.cloud.size(); ++i) {
        EXPECT_EQ(after[i].is_zero(), s.cloud.gaussians[i].instance_id != 1);
    }
}

TEST(Generator, TranslateChange) {
    SceneSpec spec;
    spec.changes = {ChangeSpec{2, ChangeKind::translate, Vec3(0.1, 0.2, 0.0)}};
    const auto s = generate_synthetic_scene(spec, 5);
    const DeltaTable& after = s.cloud.delta_table(TimeStamp::after);
    for (std::size_t i = 0; i < s.cloud.size(); ++i) {
        const Vec3 want = s.cloud.gaussians[i].instance_id == 2 ? Vec3(0.1, 0.2, 0.0) : Vec3::Zero();
        EXPECT_EQ(after[i].d_position, want);
    }
}

TEST(Generator, SharedGaussianCoversBothInstances) {
    SceneSpec spec;
    spec.shared_gaussian = true;
    const auto s = generate_synthetic_scene(spec, 0);
    ASSERT_TRUE(s.shared_index.has_value());
    const std::size_t shared = *s.shared_index;
    EXPECT_EQ(s.cloud.gaussians[shared].instance_id, 1u);

    // Top-down view: the shared splat must carry a visible share of the weight
    // at pixels of the changed instance and of an unchanged one.
    Camera cam;
    cam.width = cam.height = 64;
    cam.cx = cam.cy = 32;
    cam.fx = cam.fy = 40;
    cam.pose = look_at(Vec3(0, 0, 6), Vec3::Zero(), Vec3::UnitY());
    RenderOptions opt;
    opt.early_termination = false;
    GaussianCloud floorless = s.cloud;
    for (std::size_t i = 0; i < floorless.size(); ++i) {
        if (floorless.gaussians[i].instance_id != 0 || i == shared) continue;
        floorless.delta_table(TimeStamp::before)[i].d_position = vanish_offset();
    }
    const FrameBundle fb = render_view(floorless, TimeStamp::before, cam, opt);
    std::set<InstanceId> covered;
    const auto& ct = fb.contributions;
    for (std::size_t p = 0; p < fb.pixel_count(); ++p) {
        double w_shared = 0.0;
        for (std::size_t k = ct.begin(p); k < ct.end(p); ++k)
            if (ct.gaussian[k] == shared) w_shared = ct.weight[k];
        if (w_shared < 0.05) continue;
        for (std::size_t k = ct.begin(p); k < ct.end(p); ++k) {
            const InstanceId id = floorless.gaussians[ct.gaussian[k]].instance_id;
            if (ct.gaussian[k] != shared && id != 0 && ct.weight[k] > 0.05) covered.insert(id);
        }
    }
    EXPECT_TRUE(covered.count(1));
    EXPECT_GE(covered.size(), 2u);
}

TEST(Generator, HiddenSpinsLeaveRendersUnchanged) {
    SceneSpec spec;
    spec.hidden_spin_radius = 0.8;
    spec.changes = {ChangeSpec{1, ChangeKind::translate, Vec3::Zero()}};
    const auto base = generate_synthetic_scene(spec, 4);
    // The translate-by-zero change marks instance 1 without moving it, so the
    // only non-zero deltas are the floor spins.
    std::size_t spins = 0;
    for (const auto& d : base.cloud.delta_table(TimeStamp::after)) spins += d.d_rotation.angle() > 0.2;
    EXPECT_GT(spins, 0u);
    Camera cam;
    cam.pose = look_at(Vec3(2.0, 0.3, 3.2), Vec3::Zero());
    const FrameBundle b = render_view(base.cloud, TimeStamp::before, cam);
    const FrameBundle a = render_view(base.cloud, TimeStamp::after, cam);
    for (std::size_t i = 0; i < b.color.size(); ++i) ASSERT_NEAR(a.color[i], b.color[i], 1e-9);
    EXPECT_EQ(a.id_map, b.id_map);
}

// --- cloud container ---------------------------------------------------------

TEST(CloudIo, BinaryRoundTrip) {
    std::mt19937_64 rng(2);
    CloudFile f{oracle::random_cloud(rng, 7), std::nullopt};
    f.cloud.delta_table(TimeStamp::after)[3].d_position = Vec3(0.1, 0.2, 0.3);
    f.cloud.partition[2] = PartitionLabel::changed;
    EXPECT_EQ(decode_cloud(encode_cloud(f)), f);
    ChangeHead h;
    h.weights(1, 4) = 0.25;
    h.bias = Eigen::Vector2d(0.5, -1.5);
    f.head = h;
    EXPECT_EQ(decode_cloud(encode_cloud(f)), f);
}

TEST(CloudIo, JsonRoundTrip) {
    std::mt19937_64 rng(3);
    CloudFile f{oracle::random_cloud(rng, 4), std::nullopt};
    const std::string text = to_json(f).dump();
    EXPECT_EQ(decode_cloud(std::vector<char>(text.begin(), text.end())), f);
}

TEST(CloudIo, EmptyCloud) {
    const CloudFile f{GaussianCloud::with_gaussians({}), std::nullopt};
    const CloudFile g = decode_cloud(encode_cloud(f));
    EXPECT_EQ(g.cloud.size(), 0u);
    EXPECT_EQ(g, f);
}

TEST(CloudIo, TruncationReportsOffset) {
    std::mt19937_64 rng(4);
    const auto buf = encode_cloud(CloudFile{oracle::random_cloud(rng, 3), std::nullopt});
    for (std::size_t cut : {std::size_t{2}, std::size_t{10}, buf.size() / 2, buf.size() - 1}) {
        std::vector<char> part(buf.begin(), buf.begin() + static_cast<std::ptrdiff_t>(cut));
        EXPECT_THROW(decode_cloud(part), ParseError) << "cut at " << cut;
    }
}

TEST(CloudIo, FutureVersionRejected) {
    std::mt19937_64 rng(5);
    auto buf = encode_cloud(CloudFile{oracle::random_cloud(rng, 2), std::nullopt});
    buf[4] = 9;
    try {
        decode_cloud(buf);
        FAIL() << "expected VersionError";
    } catch (const VersionError& e) {
        EXPECT_EQ(e.found(), 9u);
    }
}

// --- poses ---------------------------------------------------------------------

TEST(Slerp, Endpoints) {
    const Quat a = oracle::axis_angle(Vec3(0, 1, 0), 0.3);
    const Quat b = oracle::axis_angle(Vec3(1, 1, 0), 2.0);
    EXPECT_EQ(slerp(a, b, 0.0), a);
    EXPECT_EQ(slerp(a, b, 1.0), b);
}

TEST(Slerp, FortyFiveDegreeMidpoint) {
    const Quat q = slerp(Quat::identity(), oracle::axis_angle(Vec3::UnitZ(), std::numbers::pi / 2), 0.5);
    const Quat want = oracle::axis_angle(Vec3::UnitZ(), std::numbers::pi / 4);
    EXPECT_NEAR(q.w, want.w, 1e-9);
    EXPECT_NEAR(q.z, want.z, 1e-9);
    EXPECT_NEAR(q.x, 0.0, 1e-12);
    EXPECT_NEAR(q.y, 0.0, 1e-12);
}

TEST(Slerp, TakesShorterArc) {
    const Quat a = oracle::axis_angle(Vec3::UnitX(), 0.2);
    const Quat b = -oracle::axis_angle(Vec3::UnitX(), 0.6);
    const Quat m = slerp(a, b, 0.5);
    EXPECT_NEAR(m.angle(), 0.4, 1e-12);
}

TEST(Slerp, RejectsBadInput) {
    EXPECT_THROW(slerp(Quat{0, 0, 0, 0}, Quat::identity(), 0.5), ValidationError);
    EXPECT_THROW(slerp(Quat::identity(), Quat::identity(), 1.5), ValidationError);
}

TEST(Lerp, Translation) {
    EXPECT_TRUE(lerp_translation(Vec3(0, 0, 0), Vec3(2, 4, 6), 0.25).isApprox(Vec3(0.5, 1, 1.5)));
}

namespace {

PoseSequence line_poses(int n, TimeStamp t) {
    PoseSequence s;
    s.epoch = t;
    for (int i = 0; i < n; ++i) {
        Pose p = look_at(Vec3(i, 0, 3), Vec3(i, 0, 0));
        p.epoch = t;
        s.poses.push_back(p);
    }
    return s;
}

} // namespace

TEST(Densify, CountsAndDeltas) {
    const PoseSequence d = densify(line_poses(4, TimeStamp::before), 3);
    ASSERT_EQ(d.size(), 4u + 3u * 3u);
    EXPECT_EQ(d.captured_indices(), (std::vector<std::size_t>{0, 4, 8, 12}));
    EXPECT_DOUBLE_EQ(d[1].delta, 0.25);
    EXPECT_DOUBLE_EQ(d[2].delta, 0.5);
    EXPECT_DOUBLE_EQ(d[3].delta, 0.75);
    EXPECT_NEAR(d[2].translation.x(), 0.5, 1e-15);
    EXPECT_EQ(d[1].source, PoseSource::interpolated);
}

TEST(Densify, MergedSequenceSkipsEpochGap) {
    const PoseSequence merged = merge(line_poses(2, TimeStamp::before), line_poses(2, TimeStamp::after));
    const PoseSequence d = densify(merged, 1);
    ASSERT_EQ(d.size(), 6u);
    const auto [b, a] = split_epochs(d);
    EXPECT_EQ(b.size(), 3u);
    EXPECT_EQ(a.size(), 3u);
    for (const auto& p : a.poses) EXPECT_EQ(p.epoch, TimeStamp::after);
}

TEST(Densify, SinglePoseWarns) {
    const PoseSequence d = densify(line_poses(1, TimeStamp::before), 3);
    EXPECT_EQ(d.size(), 1u);
    ASSERT_TRUE(d.warning.has_value());
    EXPECT_FALSE(densify(line_poses(1, TimeStamp::before), 0).warning.has_value());
    EXPECT_THROW(densify(line_poses(3, TimeStamp::before), -1), ValidationError);
}

TEST(PoseIo, RoundTrip) {
    const PoseSequence d = densify(line_poses(3, TimeStamp::after), 2);
    const PoseSequence back = poses_from_json(poses_to_json(d));
    ASSERT_EQ(back.size(), d.size());
    for (std::size_t i = 0; i < d.size(); ++i) EXPECT_EQ(back[i], d[i]);
}

TEST(PoseIo, RejectsNonUnitRotation) {
    nlohmann::json j = nlohmann::json::array({{{"q", {2, 0, 0, 0}}, {"t", {0, 0, 0}}, {"epoch", "before"}}});
    EXPECT_THROW(poses_from_json(j), ValidationError);
}

// --- configuration -------------------------------------------------------------

TEST(Config, ParsesSectionsAndOverrides) {
    auto kv = KeyValueConfig::parse("seed = 7\n[train]\niterations = 20 # short\n[segmentation]\nsource = \"oracle\"\n");
    kv.set("train.lambda_3d=0.2");
    const PipelineConfig c = pipeline_config(kv);
    EXPECT_EQ(c.seed, 7u);
    EXPECT_EQ(c.train.rng_seed, 7u);
    EXPECT_EQ(c.train.iterations, 20);
    EXPECT_DOUBLE_EQ(c.train.lambda_3d, 0.2);
}

TEST(Config, ReportsEveryProblem) {
    auto kv = KeyValueConfig::parse("threads = 0\ntrain.iterations = many\nbogus = 1\npreset = nope\n");
    try {
        pipeline_config(kv);
        FAIL() << "expected ConfigError";
    } catch (const ConfigError& e) {
        const std::string msg = e.what();
        EXPECT_NE(msg.find("4 problem"), std::string::npos) << msg;
        EXPECT_NE(msg.find("train.iterations"), std::string::npos);
        EXPECT_NE(msg.find("bogus"), std::string::npos);
        EXPECT_NE(msg.find("preset"), std::string::npos);
        EXPECT_NE(msg.find("threads"), std::string::npos);
    }
}

TEST(Config, MalformedLines) {
    EXPECT_THROW(KeyValueConfig::parse("[broken\n"), ConfigError);
    EXPECT_THROW(KeyValueConfig::parse("just words\n"), ConfigError);
    KeyValueConfig kv;
    EXPECT_THROW(kv.set("noequals"), ConfigError);
}
