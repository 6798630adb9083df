#include <cmath>
#include <vector>

#include <doctest.h>

#include "dpe_mvs/patch_match.h"
#include "test_util.h"

using namespace dpe;
using dpe::test::SimpleCamera;
using dpe::test::StereoPair;

namespace {

// Textbook Pearson correlation, two-pass in long double.
double ReferenceNcc(const std::vector<float>& a, const std::vector<float>& b) {
  long double ma = 0, mb = 0;
  for (size_t i = 0; i < a.size(); ++i) {
    ma += a[i];
    mb += b[i];
  }
  ma /= a.size();
  mb /= b.size();
  long double sab = 0, saa = 0, sbb = 0;
  for (size_t i = 0; i < a.size(); ++i) {
    sab += (a[i] - ma) * (b[i] - mb);
    saa += (a[i] - ma) * (a[i] - ma);
    sbb += (b[i] - mb) * (b[i] - mb);
  }
  return static_cast<double>(sab / std::sqrt(saa * sbb));
}

std::vector<float> RandomSamples(Rng& rng, int n) {
  std::vector<float> v(n);
  for (float& x : v) x = static_cast<float>(UniformRange(rng, 0, 255));
  return v;
}

}  // namespace

TEST_CASE("NCC cost against a textbook correlation") {
  Rng rng(41);
  for (int trial = 0; trial < 500; ++trial) {
    const int n = 9 + UniformIndex(rng, 200);
    const auto a = RandomSamples(rng, n);
    const auto b = RandomSamples(rng, n);
    const double expected = 1.0 - ReferenceNcc(a, b);
    CHECK(std::abs(NccCost(a, b) - expected) < 1e-10);
  }
}

TEST_CASE("NCC cost contracts") {
  Rng rng(42);
  const auto a = RandomSamples(rng, 36);
  CHECK(NccCost(a, a) == doctest::Approx(0.0).epsilon(1e-12));

  std::vector<float> negated(a.size());
  for (size_t i = 0; i < a.size(); ++i) negated[i] = 255.0f - a[i];
  CHECK(NccCost(a, negated) == doctest::Approx(2.0).epsilon(1e-12));

  std::vector<float> affine(a.size());
  for (size_t i = 0; i < a.size(); ++i) affine[i] = 0.5f * a[i] + 10.0f;
  CHECK(std::abs(NccCost(a, affine)) < 1e-9);

  const std::vector<float> flat(a.size(), 77.0f);
  CHECK(NccCost(a, flat) == kMaxCost);
  CHECK(NccCost(flat, a) == kMaxCost);

  CHECK_THROWS_AS(NccCost(std::vector<float>(8, 1.0f), std::vector<float>(8, 1.0f)),
                  std::invalid_argument);
  CHECK_THROWS_AS(NccCost(a, std::vector<float>(35, 1.0f)), std::invalid_argument);
}

TEST_CASE("view weight") {
  CHECK(ViewWeight(0.0) == 1.0);
  CHECK(ViewWeight(2.0) == doctest::Approx(std::exp(-4.0 / 0.72)));
  CHECK(ViewWeight(2.0) == doctest::Approx(3.87e-3).epsilon(0.01));
  CHECK(ViewWeight(0.5) > ViewWeight(1.0));
}

TEST_CASE("random initialisation") {
  const CameraModel cam = SimpleCamera(40, 30, 50);
  SceneState a(40, 30, 2), b(40, 30, 2), c(40, 30, 2);
  RandomInit(a, cam, 2.0, 10.0, 7);
  RandomInit(b, cam, 2.0, 10.0, 7);
  RandomInit(c, cam, 2.0, 10.0, 8);
  int differing = 0;
  for (int y = 0; y < 30; ++y) {
    for (int x = 0; x < 40; ++x) {
      const Eigen::Vector3d ray = cam.Ray({double(x), double(y)});
      CHECK(a.depth(x, y) >= 2.0);
      CHECK(a.depth(x, y) <= 10.0);
      CHECK(a.normal(x, y).norm() == doctest::Approx(1.0));
      CHECK(a.normal(x, y).dot(ray) < 0.0);
      CHECK(a.cost(x, y) == kMaxCost);
      CHECK(a.depth(x, y) == b.depth(x, y));
      CHECK(a.normal(x, y) == b.normal(x, y));
      differing += a.depth(x, y) != c.depth(x, y);
    }
  }
  CHECK(differing > 1000);
  CHECK_THROWS(RandomInit(a, cam, 0.0, 10.0, 7));
}

TEST_CASE("inverse-depth sampling is uniform in inverse depth") {
  Rng rng(43);
  const Eigen::Vector3d ray(0, 0, 1);
  const int n = 40000;
  int below_harmonic = 0;
  for (int i = 0; i < n; ++i) {
    const PlaneHypothesis h = RandomHypothesis(rng, ray, 1.0, 4.0);
    // Median of a uniform inverse depth on [1/4, 1] is 1 / 0.625.
    below_harmonic += h.depth < 1.0 / 0.625;
  }
  CHECK(std::abs(below_harmonic / double(n) - 0.5) < 0.01);
}

TEST_CASE("refinement candidates") {
  const CameraModel cam = SimpleCamera(64, 48, 80);
  const MatchConfig config;
  Rng rng(44);
  for (int trial = 0; trial < 300; ++trial) {
    const Eigen::Vector2i p(UniformIndex(rng, 64), UniformIndex(rng, 48));
    const Eigen::Vector3d ray = cam.Ray(p.cast<double>());
    const PlaneHypothesis hyp = RandomHypothesis(rng, ray, 1.0, 10.0);
    const auto cands = Refine(p, hyp, rng, cam, 1.0, 10.0, config);
    CHECK(cands[0].normal == hyp.normal);
    CHECK(std::abs(cands[0].depth / hyp.depth - 1.0) <= 0.05 + 1e-12);
    CHECK(cands[1].depth == hyp.depth);
    const double angle = std::acos(std::clamp(cands[1].normal.dot(hyp.normal), -1.0, 1.0));
    CHECK(angle <= 10.0 * M_PI / 180.0 + 1e-9);
    CHECK(cands[3].depth == cands[0].depth);
    CHECK(cands[3].normal == cands[1].normal);
    CHECK(cands[4].normal == hyp.normal);
    CHECK(cands[4].depth == cands[2].depth);
    CHECK(cands[5].normal == cands[2].normal);
    CHECK(cands[5].depth == hyp.depth);
    for (const PlaneHypothesis& c : cands) {
      CHECK(c.depth >= 1.0);
      CHECK(c.depth <= 10.0);
      CHECK(c.normal.norm() == doctest::Approx(1.0));
      CHECK(c.normal.dot(ray) < 0.0);
    }
  }
}

TEST_CASE("multi-view cost is minimal at the true plane") {
  const StereoPair pair(45);
  const MatchContext ctx = pair.Context();
  const PlaneHypothesis truth{{0, 0, -1}, pair.depth};
  for (int y = 10; y < 54; y += 7) {
    for (int x = 20; x < 80; x += 9) {
      const PatchSpec spec{{x, y}, 5, 2};
      const double at_truth = MultiViewCost(ctx, truth, spec);
      CHECK(at_truth < 1e-6);
      const double off = MultiViewCost(ctx, {{0, 0, -1}, pair.depth * 1.3}, spec);
      CHECK(off > at_truth + 0.2);
    }
  }
  // A patch whose warp leaves the source image costs the maximum.
  const PatchSpec edge{{2, 30}, 5, 2};
  CHECK(MultiViewCost(ctx, truth, edge) == doctest::Approx(kMaxCost));
}

TEST_CASE("checkerboard sweep never increases cost") {
  const StereoPair pair(46);
  const MatchContext ctx = pair.Context();
  const MatchConfig config;
  SceneState state(96, 64, 1);
  RandomInit(state, pair.ref_cam, 1.0, 20.0, 3);
  EvaluateState(state, ctx, config);
  const Grid<double> before = state.cost;

  Sampler sampler = [&](const Eigen::Vector2i& p, const SceneState& s,
                        const PixelEvaluator&, std::vector<Candidate>& out) {
    Rng rng = MakeRng(9, {uint64_t(p.x()), uint64_t(p.y())});
    for (const PlaneHypothesis& h :
         Refine(p, s.Hypothesis(p), rng, pair.ref_cam, 1.0, 20.0, config)) {
      out.push_back({h});
    }
    out.push_back({PlaneHypothesis{{0, 0, -1}, 50.0}});  // out of range, ignored
  };
  const int red = CheckerboardSweep(state, Color::kRed, sampler, ctx, config);
  CHECK(red > 0);
  for (int y = 0; y < 64; ++y) {
    for (int x = 0; x < 96; ++x) {
      CHECK(state.cost(x, y) <= before(x, y));
      CHECK(state.depth(x, y) <= 20.0);
      if (ColorOf({x, y}) == Color::kBlack) CHECK(state.cost(x, y) == before(x, y));
    }
  }

  // The stored cost matches a fresh evaluation of the stored hypothesis.
  SceneState check = state;
  EvaluateState(check, ctx, config);
  for (size_t i = 0; i < state.cost.size(); ++i) {
    CHECK(check.cost.data()[i] == doctest::Approx(state.cost.data()[i]).epsilon(1e-9));
  }

  const PixelFilter only_left = [](const Eigen::Vector2i& p) { return p.x() < 10; };
  const Grid<double> mid = state.cost;
  CheckerboardSweep(state, Color::kBlack, sampler, ctx, config, only_left);
  for (int y = 0; y < 64; ++y) {
    for (int x = 10; x < 96; ++x) CHECK(state.cost(x, y) == mid(x, y));
  }
}

TEST_CASE("geometric consistency") {
  const CameraModel ref = SimpleCamera(80, 60, 100);
  CameraModel other = ref;
  other.center = {0.2, 0, 0};
  DepthMap other_depth(80, 60, 4.0);
  const ConsistencyView view{&other, &other_depth};

  CHECK(GeometricallyConsistent({40, 30}, 4.0, ref, {&view, 1}, 0.01));
  CHECK(GeometricallyConsistent({40, 30}, 4.03, ref, {&view, 1}, 0.01));
  CHECK_FALSE(GeometricallyConsistent({40, 30}, 4.2, ref, {&view, 1}, 0.01));
  CHECK_FALSE(GeometricallyConsistent({40, 30}, 0.0, ref, {&view, 1}, 0.01));
  // Disparity 5 px pushes column 2 out of the other image.
  CHECK_FALSE(GeometricallyConsistent({2, 30}, 4.0, ref, {&view, 1}, 0.01));

  SceneState state(80, 60, 1);
  for (auto& d : state.depth.data()) d = 4.0;
  for (auto& c : state.cost.data()) c = 0.1;
  state.cost(50, 20) = 0.3;
  state.depth(60, 40) = 6.0;
  const Mask reliable = ClassifyReliability(state, ref, {&view, 1}, MatchConfig{});
  CHECK(reliable(40, 30) == 1);
  CHECK(reliable(50, 20) == 0);
  CHECK(reliable(60, 40) == 0);
  CHECK(reliable(2, 30) == 0);
}

TEST_CASE("configuration validation") {
  MatchConfig c;
  CHECK_NOTHROW(c.Validate());
  c.patch_radius = 1;
  CHECK_THROWS(c.Validate());
  c = {};
  c.patch_radius = 20;
  c.patch_stride = 1;
  CHECK_THROWS(c.Validate());
  CHECK_THROWS(SceneState(4, 4, 0));
  CHECK_THROWS(SceneState(4, 4, 9));
}
