#include <cmath>

#include <doctest.h>

#include "dpe_mvs/edge_cues.h"
#include "dpe_mvs/random.h"

using namespace dpe;

namespace {

GrayImage StepImage(int width, int height, int step_x, float left, float right) {
  GrayImage img(width, height, left);
  for (int y = 0; y < height; ++y) {
    for (int x = step_x; x < width; ++x) img(x, y) = right;
  }
  return img;
}

int64_t Count(const Mask& m) {
  int64_t n = 0;
  for (uint8_t v : m.data()) n += v != 0;
  return n;
}

// Fraction of set pixels in the window, computed by direct enumeration.
double WindowFraction(const Mask& m, int cx, int cy, int half) {
  double set = 0, area = 0;
  for (int y = cy - half; y <= cy + half; ++y) {
    for (int x = cx - half; x <= cx + half; ++x) {
      if (!m.Contains(x, y)) continue;
      area += 1;
      set += m(x, y) ? 1 : 0;
    }
  }
  return set / area;
}

}  // namespace

TEST_CASE("constant images have no edges") {
  const GrayImage flat(64, 48, 120.0f);
  CHECK(Count(ExtractFineEdges(flat, 0.67)) == 0);
  CHECK(Count(ExtractCoarseEdges(flat)) == 0);
}

TEST_CASE("a vertical step yields a one-pixel fine edge at the step") {
  const int step = 40;
  const Mask fine = ExtractFineEdges(StepImage(96, 64, step, 50, 200), 0.67);
  // Rows away from the top and bottom border carry exactly one edge pixel
  // within one column of the step.
  for (int y = 4; y < 60; ++y) {
    int count = 0, column = -1;
    for (int x = 0; x < 96; ++x) {
      if (fine(x, y)) {
        ++count;
        column = x;
      }
    }
    CHECK(count == 1);
    CHECK(std::abs(column - step) <= 1);
  }
}

TEST_CASE("fine edges close around checker cells") {
  GrayImage img(96, 96, 0.0f);
  for (int y = 0; y < 96; ++y) {
    for (int x = 0; x < 96; ++x) img(x, y) = ((x / 16 + y / 16) % 2) ? 200.0f : 60.0f;
  }
  const Mask fine = ExtractFineEdges(img, 0.67);
  // Every interior cell boundary line is crossed by an edge in every row/column.
  for (int boundary = 16; boundary < 96; boundary += 16) {
    for (int t = 4; t < 92; ++t) {
      if (t % 16 <= 1 || t % 16 >= 15) continue;  // skip corners
      const bool vertical = fine(boundary - 1, t) || fine(boundary, t);
      const bool horizontal = fine(t, boundary - 1) || fine(t, boundary);
      CHECK(vertical);
      CHECK(horizontal);
    }
  }
}

TEST_CASE("coarse edges trace the sides of a filled rectangle") {
  GrayImage img(160, 120, 40.0f);
  const int x0 = 40, x1 = 119, y0 = 30, y1 = 89;
  for (int y = y0; y <= y1; ++y) {
    for (int x = x0; x <= x1; ++x) img(x, y) = 210.0f;
  }
  const Mask coarse = ExtractCoarseEdges(img);
  auto near_column = [&](int x, int y) {
    return coarse(x - 1, y) || coarse(x, y) || coarse(x + 1, y);
  };
  auto near_row = [&](int x, int y) {
    return coarse(x, y - 1) || coarse(x, y) || coarse(x, y + 1);
  };
  for (int y = y0 + 3; y <= y1 - 3; ++y) {
    CHECK(near_column(x0, y));
    CHECK(near_column(x1, y));
  }
  for (int x = x0 + 3; x <= x1 - 3; x += 1) {
    CHECK(near_row(x, y0));
    CHECK(near_row(x, y1));
  }
  // Nothing far from the rectangle outline.
  for (int y = 0; y < 120; ++y) {
    for (int x = 0; x < 160; ++x) {
      const bool far = (x < x0 - 3 || x > x1 + 3 || y < y0 - 3 || y > y1 + 3) ||
                       (x > x0 + 3 && x < x1 - 3 && y > y0 + 3 && y < y1 - 3);
      if (far) CHECK_FALSE(coarse(x, y));
    }
  }
}

TEST_CASE("noise has denser coarse edges than a smooth ramp") {
  Rng rng(31);
  GrayImage noise(128, 128), ramp(128, 128);
  for (int y = 0; y < 128; ++y) {
    for (int x = 0; x < 128; ++x) {
      noise(x, y) = static_cast<float>(UniformIndex(rng, 256));
      ramp(x, y) = static_cast<float>(x * 2);
    }
  }
  CHECK(Count(ExtractCoarseEdges(noise)) > Count(ExtractCoarseEdges(ramp)));
}

TEST_CASE("low-texture threshold") {
  CHECK(LowTextureThreshold(1, 640 * 480) == doctest::Approx(300.0));
  CHECK(LowTextureThreshold(2, 640 * 480) == doctest::Approx(75.0));
}

TEST_CASE("region segmentation") {
  SUBCASE("empty mask is a single low-texture region") {
    const Regions r = SegmentRegions(Mask(64, 48, 0), 1, 64 * 48);
    CHECK(r.count == 1);
    CHECK(r.sizes[1] == 64 * 48);
    CHECK(r.low_texture[1] == 1);
  }
  SUBCASE("a full-frame cross makes four regions") {
    const int w = 200, h = 150;
    Mask cross(w, h, 0);
    for (int y = 0; y < h; ++y) cross(60, y) = 1;
    for (int x = 0; x < w; ++x) cross(x, 40) = 1;
    const int64_t area = 640 * 480;  // threshold 300 at level 1
    const Regions r = SegmentRegions(cross, 1, area);
    REQUIRE(r.count == 4);
    std::vector<int64_t> sizes(r.sizes.begin() + 1, r.sizes.end());
    std::sort(sizes.begin(), sizes.end());
    const std::vector<int64_t> expected = {60 * 40, 60 * 109, 139 * 40, 139 * 109};
    std::vector<int64_t> sorted = expected;
    std::sort(sorted.begin(), sorted.end());
    CHECK(sizes == sorted);
    int64_t total = r.sizes[0];
    for (int i = 1; i <= r.count; ++i) {
      total += r.sizes[i];
      CHECK(r.low_texture[i] == (r.sizes[i] > 300 ? 1 : 0));
    }
    CHECK(total == w * h);
    CHECK(r.labels(60, 10) == 0);
  }
  SUBCASE("small regions are not low-texture") {
    Mask box(100, 100, 0);
    for (int i = 10; i <= 20; ++i) box(i, 10) = box(i, 20) = box(10, i) = box(20, i) = 1;
    const Regions r = SegmentRegions(box, 1, 640 * 480);
    const int inner = r.labels(15, 15);
    CHECK(r.sizes[inner] == 81);
    CHECK(r.low_texture[inner] == 0);
    CHECK(r.low_texture[r.labels(50, 50)] == 1);
  }
}

TEST_CASE("edge distance") {
  Mask m(50, 30, 0);
  m(21, 10) = 1;
  CHECK(EdgeDistance({20, 10}, Direction::kE, m) == 1);
  CHECK(EdgeDistance({10, 5}, Direction::kE, Mask(50, 30, 0)) == 50 - 1 - 10);
  CHECK(EdgeDistance({10, 5}, Direction::kN, Mask(50, 30, 0)) == 5);

  SUBCASE("diagonal rays against a brute-force walk") {
    Mask line(60, 60, 0);
    for (int y = 0; y < 60; ++y) line(45, y) = 1;
    for (int x = 0; x < 60; ++x) line(x, 50) = 1;
    Rng rng(32);
    for (int i = 0; i < 200; ++i) {
      const Eigen::Vector2i p(UniformIndex(rng, 60), UniformIndex(rng, 60));
      for (Direction d : kAllDirections) {
        const Eigen::Vector2i step = DirectionStep(d);
        int expected = 0;
        Eigen::Vector2i q = p;
        while (true) {
          const Eigen::Vector2i next = q + step;
          if (!line.Contains(next)) break;
          ++expected;
          q = next;
          if (line(q)) break;
        }
        CHECK(EdgeDistance(p, d, line) == expected);
      }
    }
  }
}

TEST_CASE("stochastic probability") {
  const TextureConfig config;
  CHECK(StochasticProbabilityFromDensity(0.35, config) == 0.5);
  CHECK(std::abs(StochasticProbabilityFromDensity(0.0, config) - 1.0 / (1.0 + std::exp(8.75))) <
        1e-15);
  CHECK(StochasticProbabilityFromDensity(0.0, config) == doctest::Approx(1.58e-4).epsilon(0.01));
  CHECK(1.0 - StochasticProbabilityFromDensity(1.0, config) ==
        doctest::Approx(1.0 / (1.0 + std::exp(16.25))).epsilon(1e-6));

  SUBCASE("density uses the clipped window") {
    Rng rng(33);
    Mask fine(40, 30, 0), coarse(40, 30, 0);
    for (auto& v : fine.data()) v = UniformUnit(rng) < 0.3;
    for (auto& v : coarse.data()) v = UniformUnit(rng) < 0.2;
    for (const Eigen::Vector2i& p : {Eigen::Vector2i(0, 0), Eigen::Vector2i(20, 15),
                                     Eigen::Vector2i(39, 3), Eigen::Vector2i(7, 29)}) {
      const double expected = config.alpha * WindowFraction(fine, p.x(), p.y(), 5) +
                              (1 - config.alpha) * WindowFraction(coarse, p.x(), p.y(), 5);
      CHECK(EdgeDensity(p, fine, coarse, config) == doctest::Approx(expected).epsilon(1e-12));
    }
  }

  SUBCASE("monotone in edge counts") {
    Mask fine(21, 21, 0), coarse(21, 21, 0);
    double previous = -1;
    for (int i = 0; i < 21 * 21; i += 7) {
      fine.data()[i] = 1;
      const double p = StochasticProbability({10, 10}, fine, coarse, config);
      CHECK(p >= previous);
      previous = p;
      coarse.data()[(i * 3) % (21 * 21)] = 1;
      const double q = StochasticProbability({10, 10}, fine, coarse, config);
      CHECK(q >= previous);
      previous = q;
    }
  }
}

TEST_CASE("stochastic draw") {
  Rng rng(34);
  int accepted = 0;
  for (int i = 0; i < 100000; ++i) {
    const double r = UniformUnit(rng);
    CHECK_FALSE(IsStochastic(0.0, r));
    CHECK(IsStochastic(1.0, r));
    accepted += IsStochastic(0.5, r) ? 1 : 0;
  }
  CHECK(std::abs(accepted / 100000.0 - 0.5) < 0.01);
}

TEST_CASE("edge cue bundle is consistent") {
  Rng rng(35);
  GrayImage img(80, 60, 100.0f);
  for (int y = 0; y < 60; ++y) {
    for (int x = 40; x < 80; ++x) img(x, y) = static_cast<float>(UniformIndex(rng, 256));
  }
  const EdgeCues cues = ExtractEdgeCues(img, 1, 80 * 60, {}, {}, 7);
  CHECK(cues.width() == 80);
  CHECK(cues.regions.labels.width() == 80);
  for (size_t i = 0; i < cues.fine.size(); ++i) {
    const float p = cues.stochastic_prob.data()[i];
    CHECK(p >= 0.0f);
    CHECK(p <= 1.0f);
    if (cues.coarse.data()[i]) CHECK(cues.regions.labels.data()[i] == 0);
    if (!cues.coarse.data()[i]) CHECK(cues.regions.labels.data()[i] >= 1);
  }
  const EdgeCues again = ExtractEdgeCues(img, 1, 80 * 60, {}, {}, 7);
  CHECK(std::equal(cues.stochastic.data().begin(), cues.stochastic.data().end(),
                   again.stochastic.data().begin()));
}

TEST_CASE("texture config validation") {
  TextureConfig c;
  CHECK_NOTHROW(c.Validate());
  c.window = 10;
  CHECK_THROWS(c.Validate());
  c = {};
  c.sigma = 1.0;
  CHECK_THROWS(c.Validate());
}
