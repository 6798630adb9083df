#include "dpe_mvs/edge_cues.h"

#include <algorithm>
#include <cmath>
#include <deque>
#include <numbers>
#include <stdexcept>

#include "dpe_mvs/random.h"
#include "dpe_mvs/raster.h"

namespace dpe {
namespace {

constexpr double kCannyBlurSigma = 1.4;
constexpr uint64_t kStochasticStream = 0x5743;

int Clamp(int v, int lo, int hi) { return std::min(std::max(v, lo), hi); }

Grid<float> GaussianBlur5(const GrayImage& image) {
  double weights[5];
  double sum = 0.0;
  for (int i = -2; i <= 2; ++i) {
    weights[i + 2] = std::exp(-(i * i) / (2.0 * kCannyBlurSigma * kCannyBlurSigma));
    sum += weights[i + 2];
  }
  for (double& w : weights) w /= sum;

  const int w = image.width();
  const int h = image.height();
  Grid<float> tmp(w, h);
  Grid<float> out(w, h);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      double acc = 0.0;
      for (int k = -2; k <= 2; ++k) {
        acc += weights[k + 2] * image(Clamp(x + k, 0, w - 1), y);
      }
      tmp(x, y) = static_cast<float>(acc);
    }
  }
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      double acc = 0.0;
      for (int k = -2; k <= 2; ++k) {
        acc += weights[k + 2] * tmp(x, Clamp(y + k, 0, h - 1));
      }
      out(x, y) = static_cast<float>(acc);
    }
  }
  return out;
}

double Median(const GrayImage& image) {
  std::vector<float> values(image.data().begin(), image.data().end());
  const size_t mid = values.size() / 2;
  std::nth_element(values.begin(), values.begin() + mid, values.end());
  return values[mid];
}

}  // namespace

void TextureConfig::Validate() const {
  if (!(sigma > 0.0 && sigma < 1.0) || !(alpha >= 0.0 && alpha <= 1.0) ||
      !(beta1 > 0.0) || !(beta2 > 0.0 && beta2 < 1.0) || window < 1 ||
      window % 2 == 0) {
    throw std::invalid_argument("TextureConfig: invalid parameters");
  }
}

Mask ExtractFineEdges(const GrayImage& image, double sigma) {
  if (image.empty()) {
    throw std::invalid_argument("ExtractFineEdges: empty image");
  }
  const int w = image.width();
  const int h = image.height();
  const Grid<float> blurred = GaussianBlur5(image);

  Grid<float> magnitude(w, h);
  Grid<uint8_t> sector(w, h);
  for (int y = 0; y < h; ++y) {
    const int ym = Clamp(y - 1, 0, h - 1);
    const int yp = Clamp(y + 1, 0, h - 1);
    for (int x = 0; x < w; ++x) {
      const int xm = Clamp(x - 1, 0, w - 1);
      const int xp = Clamp(x + 1, 0, w - 1);
      const double gx = (blurred(xp, ym) + 2.0 * blurred(xp, y) + blurred(xp, yp)) -
                        (blurred(xm, ym) + 2.0 * blurred(xm, y) + blurred(xm, yp));
      const double gy = (blurred(xm, yp) + 2.0 * blurred(x, yp) + blurred(xp, yp)) -
                        (blurred(xm, ym) + 2.0 * blurred(x, ym) + blurred(xp, ym));
      magnitude(x, y) = static_cast<float>(std::hypot(gx, gy));
      // Quantize the gradient direction to 0, 45, 90, 135 degrees.
      double angle = std::atan2(gy, gx) * 180.0 / std::numbers::pi;
      if (angle < 0) angle += 180.0;
      uint8_t s = 0;
      if (angle >= 22.5 && angle < 67.5) {
        s = 1;
      } else if (angle >= 67.5 && angle < 112.5) {
        s = 2;
      } else if (angle >= 112.5 && angle < 157.5) {
        s = 3;
      }
      sector(x, y) = s;
    }
  }

  const double median = Median(image);
  const double low = std::clamp(median * (1.0 - sigma), 0.0, 255.0);
  const double high = std::clamp(median * (1.0 + sigma), 0.0, 255.0);

  // Non-maximum suppression; ties resolved toward the lower/left neighbor so
  // a symmetric ridge stays one pixel wide.
  static constexpr int kNx[4] = {1, 1, 0, -1};
  static constexpr int kNy[4] = {0, 1, 1, 1};
  Grid<uint8_t> state(w, h, 0);  // 0 none, 1 weak, 2 strong
  std::deque<Eigen::Vector2i> queue;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const float m = magnitude(x, y);
      if (!(m > low)) continue;
      const int s = sector(x, y);
      const int ax = x + kNx[s], ay = y + kNy[s];
      const int bx = x - kNx[s], by = y - kNy[s];
      const float ma = magnitude.Contains(ax, ay) ? magnitude(ax, ay) : 0.0f;
      const float mb = magnitude.Contains(bx, by) ? magnitude(bx, by) : 0.0f;
      if (!(m > mb && m >= ma)) continue;
      if (m > high) {
        state(x, y) = 2;
        queue.emplace_back(x, y);
      } else {
        state(x, y) = 1;
      }
    }
  }

  Mask edges(w, h, 0);
  for (const auto& p : queue) edges(p) = 1;
  while (!queue.empty()) {
    const Eigen::Vector2i p = queue.front();
    queue.pop_front();
    for (int dy = -1; dy <= 1; ++dy) {
      for (int dx = -1; dx <= 1; ++dx) {
        const int qx = p.x() + dx, qy = p.y() + dy;
        if (!state.Contains(qx, qy) || state(qx, qy) != 1 || edges(qx, qy)) {
          continue;
        }
        edges(qx, qy) = 1;
        queue.emplace_back(qx, qy);
      }
    }
  }
  return edges;
}

Mask ExtractCoarseEdges(const GrayImage& image,
                        const CoarseEdgeConfig& config) {
  if (image.empty()) {
    throw std::invalid_argument("ExtractCoarseEdges: empty image");
  }
  const int w = image.width();
  const int h = image.height();

  Grid<float> roberts(w, h, 0.0f);
  float max_mag = 0.0f;
  for (int y = 0; y + 1 < h; ++y) {
    for (int x = 0; x + 1 < w; ++x) {
      const float g1 = image(x, y) - image(x + 1, y + 1);
      const float g2 = image(x + 1, y) - image(x, y + 1);
      const float m = std::sqrt(g1 * g1 + g2 * g2);
      roberts(x, y) = m;
      max_mag = std::max(max_mag, m);
    }
  }
  Mask result(w, h, 0);
  const double threshold =
      std::max(config.roberts_fraction * max_mag, config.min_gradient);
  if (max_mag < threshold) {
    return result;
  }

  std::vector<Eigen::Vector2i> edge_pixels;
  Mask edge_mask(w, h, 0);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      if (roberts(x, y) >= threshold) {
        edge_pixels.emplace_back(x, y);
        edge_mask(x, y) = 1;
      }
    }
  }

  constexpr int kThetaBins = 180;
  const int max_rho = static_cast<int>(std::ceil(std::hypot(w, h)));
  const int rho_bins = 2 * max_rho + 1;
  std::vector<double> cos_t(kThetaBins), sin_t(kThetaBins);
  for (int t = 0; t < kThetaBins; ++t) {
    const double theta = t * std::numbers::pi / kThetaBins;
    cos_t[t] = std::cos(theta);
    sin_t[t] = std::sin(theta);
  }
  std::vector<int> votes(static_cast<size_t>(kThetaBins) * rho_bins, 0);
  auto vote_at = [&](int t, int r) -> int& {
    return votes[static_cast<size_t>(t) * rho_bins + r];
  };
  for (const auto& p : edge_pixels) {
    for (int t = 0; t < kThetaBins; ++t) {
      const int r = static_cast<int>(
          std::lround(p.x() * cos_t[t] + p.y() * sin_t[t])) + max_rho;
      ++vote_at(t, r);
    }
  }

  const int vote_threshold =
      std::max(config.min_votes, std::min(w, h) / config.vote_divisor);
  struct Peak {
    int votes, theta, rho;
  };
  std::vector<Peak> peaks;
  const int pr = config.peak_radius;
  for (int t = 0; t < kThetaBins; ++t) {
    for (int r = 0; r < rho_bins; ++r) {
      const int v = vote_at(t, r);
      if (v < vote_threshold) continue;
      bool is_peak = true;
      for (int dt = -pr; dt <= pr && is_peak; ++dt) {
        for (int dr = -pr; dr <= pr; ++dr) {
          if (dt == 0 && dr == 0) continue;
          const int tt = t + dt, rr = r + dr;
          if (tt < 0 || tt >= kThetaBins || rr < 0 || rr >= rho_bins) continue;
          const int u = vote_at(tt, rr);
          const bool earlier = dt < 0 || (dt == 0 && dr < 0);
          if (u > v || (earlier && u == v)) {
            is_peak = false;
            break;
          }
        }
      }
      if (is_peak) peaks.push_back({v, t, r - max_rho});
    }
  }
  std::stable_sort(peaks.begin(), peaks.end(),
                   [](const Peak& a, const Peak& b) { return a.votes > b.votes; });

  auto supported = [&](int x, int y, int nx, int ny) {
    if (edge_mask.Contains(x, y) && edge_mask(x, y)) return true;
    if (edge_mask.Contains(x + nx, y + ny) && edge_mask(x + nx, y + ny)) return true;
    return edge_mask.Contains(x - nx, y - ny) && edge_mask(x - nx, y - ny);
  };

  for (const Peak& peak : peaks) {
    const double c = cos_t[peak.theta];
    const double s = sin_t[peak.theta];
    const Eigen::Vector2d base(peak.rho * c, peak.rho * s);
    const Eigen::Vector2d dir(-s, c);
    // Perpendicular one-pixel tolerance along the dominant normal axis.
    const int nx = std::abs(c) >= std::abs(s) ? 1 : 0;
    const int ny = 1 - nx;
    auto pixel_at = [&](int step) -> Eigen::Vector2i {
      const Eigen::Vector2d q = base + step * dir;
      return {static_cast<int>(std::lround(q.x())),
              static_cast<int>(std::lround(q.y()))};
    };
    auto emit = [&](int s0, int s1) {
      if (s1 - s0 + 1 < config.min_segment_length) return;
      RasterizeLine(pixel_at(s0), pixel_at(s1), [&](const Eigen::Vector2i& q) {
        if (result.Contains(q)) result(q) = 1;
      });
    };
    int start = 0, last = 0;
    bool open = false;
    for (int step = -max_rho; step <= max_rho; ++step) {
      const Eigen::Vector2i q = pixel_at(step);
      if (!edge_mask.Contains(q)) continue;
      if (!supported(q.x(), q.y(), nx, ny)) continue;
      if (open && step - last > config.max_gap + 1) {
        emit(start, last);
        open = false;
      }
      if (!open) {
        start = step;
        open = true;
      }
      last = step;
    }
    if (open) emit(start, last);
  }
  return result;
}

double LowTextureThreshold(int level, int64_t image_area) {
  return static_cast<double>(image_area) / (256.0 * std::pow(4.0, level));
}

Regions SegmentRegions(const Mask& coarse, int level, int64_t image_area) {
  const int w = coarse.width();
  const int h = coarse.height();
  Regions regions;
  regions.labels = LabelMap(w, h, 0);
  regions.sizes.push_back(0);
  std::vector<Eigen::Vector2i> stack;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      if (coarse(x, y)) {
        ++regions.sizes[0];
        continue;
      }
      if (regions.labels(x, y) != 0) continue;
      const int label = ++regions.count;
      int64_t size = 0;
      stack.assign(1, {x, y});
      regions.labels(x, y) = label;
      while (!stack.empty()) {
        const Eigen::Vector2i p = stack.back();
        stack.pop_back();
        ++size;
        static constexpr int kDx[4] = {1, -1, 0, 0};
        static constexpr int kDy[4] = {0, 0, 1, -1};
        for (int k = 0; k < 4; ++k) {
          const int qx = p.x() + kDx[k], qy = p.y() + kDy[k];
          if (!coarse.Contains(qx, qy) || coarse(qx, qy) ||
              regions.labels(qx, qy) != 0) {
            continue;
          }
          regions.labels(qx, qy) = label;
          stack.emplace_back(qx, qy);
        }
      }
      regions.sizes.push_back(size);
    }
  }
  const double threshold = LowTextureThreshold(level, image_area);
  regions.low_texture.assign(regions.sizes.size(), 0);
  for (int r = 1; r <= regions.count; ++r) {
    regions.low_texture[r] = regions.sizes[r] > threshold ? 1 : 0;
  }
  return regions;
}

int EdgeDistance(const Eigen::Vector2i& p, Direction direction,
                 const Mask& mask) {
  const Eigen::Vector2i step = DirectionStep(direction);
  Eigen::Vector2i q = p;
  for (int k = 1;; ++k) {
    q += step;
    if (!mask.Contains(q)) return k - 1;
    if (mask(q)) return k;
  }
}

double EdgeDensity(const Eigen::Vector2i& p, const Mask& fine,
                   const Mask& coarse, const TextureConfig& config) {
  const int r = config.window / 2;
  const int x0 = std::max(0, p.x() - r), x1 = std::min(fine.width() - 1, p.x() + r);
  const int y0 = std::max(0, p.y() - r), y1 = std::min(fine.height() - 1, p.y() + r);
  int n_fine = 0, n_coarse = 0;
  for (int y = y0; y <= y1; ++y) {
    for (int x = x0; x <= x1; ++x) {
      n_fine += fine(x, y) ? 1 : 0;
      n_coarse += coarse(x, y) ? 1 : 0;
    }
  }
  const double area = static_cast<double>(x1 - x0 + 1) * (y1 - y0 + 1);
  return (config.alpha * n_fine + (1.0 - config.alpha) * n_coarse) / area;
}

double StochasticProbabilityFromDensity(double density,
                                        const TextureConfig& config) {
  return 1.0 / (1.0 + std::exp(-config.beta1 * (density - config.beta2)));
}

double StochasticProbability(const Eigen::Vector2i& p, const Mask& fine,
                             const Mask& coarse, const TextureConfig& config) {
  return StochasticProbabilityFromDensity(EdgeDensity(p, fine, coarse, config),
                                          config);
}

EdgeCues ExtractEdgeCues(const GrayImage& image, int level, int64_t image_area,
                         const TextureConfig& texture,
                         const CoarseEdgeConfig& coarse, uint64_t seed) {
  texture.Validate();
  EdgeCues cues;
  cues.fine = ExtractFineEdges(image, texture.sigma);
  cues.coarse = ExtractCoarseEdges(image, coarse);
  cues.regions = SegmentRegions(cues.coarse, level, image_area);

  const int w = image.width();
  const int h = image.height();
  // Summed-area tables give the same integer counts as EdgeDensity.
  Grid<int> sat_fine(w + 1, h + 1, 0), sat_coarse(w + 1, h + 1, 0);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      sat_fine(x + 1, y + 1) = cues.fine(x, y) + sat_fine(x, y + 1) +
                               sat_fine(x + 1, y) - sat_fine(x, y);
      sat_coarse(x + 1, y + 1) = cues.coarse(x, y) + sat_coarse(x, y + 1) +
                                 sat_coarse(x + 1, y) - sat_coarse(x, y);
    }
  }
  const int r = texture.window / 2;
  cues.stochastic_prob = Grid<float>(w, h);
  cues.stochastic = Mask(w, h, 0);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const int x0 = std::max(0, x - r), x1 = std::min(w - 1, x + r) + 1;
      const int y0 = std::max(0, y - r), y1 = std::min(h - 1, y + r) + 1;
      auto box = [&](const Grid<int>& s) {
        return s(x1, y1) - s(x0, y1) - s(x1, y0) + s(x0, y0);
      };
      const double area = static_cast<double>(x1 - x0) * (y1 - y0);
      const double density = (texture.alpha * box(sat_fine) +
                              (1.0 - texture.alpha) * box(sat_coarse)) /
                             area;
      const double prob = StochasticProbabilityFromDensity(density, texture);
      cues.stochastic_prob(x, y) = static_cast<float>(prob);
      Rng rng = MakeRng(seed, {kStochasticStream, static_cast<uint64_t>(level),
                               cues.fine.Index(x, y)});
      cues.stochastic(x, y) = IsStochastic(prob, UniformUnit(rng)) ? 1 : 0;
    }
  }
  return cues;
}

}  // namespace dpe
