#include "dlgnet/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <stdexcept>

DLGNET_NAMESPACE_BEGIN

namespace {

constexpr double kEps = std::numeric_limits<double>::epsilon();

struct Map {
  std::size_t h = 0, w = 0;
  std::vector<double> v;
  double at(std::size_t y, std::size_t x) const { return v[y * w + x]; }
};

Map as_map(const Tensor& t, const char* what) {
  const auto& s = t.shape();
  if (s.size() < 2) throw ShapeError(std::string(what) + " must be at least rank 2");
  for (std::size_t i = 0; i + 2 < s.size(); ++i)
    if (s[i] != 1) throw ShapeError(std::string(what) + " must hold a single map, got " + to_string(s));
  Map m;
  m.h = s[s.size() - 2];
  m.w = s[s.size() - 1];
  m.v.assign(t.data().begin(), t.data().end());
  return m;
}

std::pair<Map, Map> checked_pair(const Tensor& pred, const Tensor& gt) {
  Map p = as_map(pred, "pred"), g = as_map(gt, "gt");
  if (p.h != g.h || p.w != g.w)
    throw ShapeError("pred " + to_string(pred.shape()) + " and gt " + to_string(gt.shape()) + " differ");
  if (p.v.empty()) throw ShapeError("empty saliency map");
  for (double v : g.v)
    if (v != 0.0 && v != 1.0) throw std::invalid_argument("gt must be binary");
  for (double v : p.v)
    if (!(v >= 0.0 && v <= 1.0)) throw std::invalid_argument("pred must lie in [0,1]");
  return {std::move(p), std::move(g)};
}

double mean_of(const std::vector<double>& v) {
  double s = 0;
  for (double x : v) s += x;
  return v.empty() ? 0.0 : s / double(v.size());
}

// Foreground / background object similarity.
double object_score(const std::vector<double>& values) {
  if (values.empty()) return 0;
  const double x = mean_of(values);
  double var = 0;
  for (double v : values) var += (v - x) * (v - x);
  const double sigma = values.size() > 1 ? std::sqrt(var / double(values.size() - 1)) : 0.0;
  return 2.0 * x / (x * x + 1.0 + sigma + kEps);
}

double s_object(const Map& p, const Map& g) {
  std::vector<double> fg, bg;
  for (std::size_t i = 0; i < g.v.size(); ++i) {
    if (g.v[i] == 1.0)
      fg.push_back(p.v[i]);
    else
      bg.push_back(1.0 - p.v[i]);
  }
  const double u = mean_of(g.v);
  return u * object_score(fg) + (1 - u) * object_score(bg);
}

double region_ssim(const Map& p, const Map& g, std::size_t y0, std::size_t y1, std::size_t x0,
                   std::size_t x1) {
  const double n = double((y1 - y0) * (x1 - x0));
  if (n == 0) return 0;
  double mx = 0, my = 0;
  for (std::size_t y = y0; y < y1; ++y)
    for (std::size_t x = x0; x < x1; ++x) {
      mx += p.at(y, x);
      my += g.at(y, x);
    }
  mx /= n;
  my /= n;
  double sxx = 0, syy = 0, sxy = 0;
  for (std::size_t y = y0; y < y1; ++y)
    for (std::size_t x = x0; x < x1; ++x) {
      const double a = p.at(y, x) - mx, b = g.at(y, x) - my;
      sxx += a * a;
      syy += b * b;
      sxy += a * b;
    }
  sxx /= (n - 1 + kEps);
  syy /= (n - 1 + kEps);
  sxy /= (n - 1 + kEps);
  const double alpha = 4 * mx * my * sxy;
  const double beta = (mx * mx + my * my) * (sxx + syy);
  if (alpha != 0) return alpha / (beta + kEps);
  return beta == 0 ? 1.0 : 0.0;
}

// Boundary index for a split at continuous position b in [0, n]. Ties are
// rounded toward the middle so that mirroring the map mirrors the split.
std::size_t split_index(double b, std::size_t n) {
  const double lo = std::floor(b);
  if (b - lo != 0.5) return std::size_t(std::lround(b));
  return std::size_t(b < double(n) / 2 ? lo + 1 : lo);
}

double s_region(const Map& p, const Map& g) {
  // Quadrant split through the foreground centroid (pixel centres at x + 0.5).
  double total = 0, sx = 0, sy = 0;
  for (std::size_t y = 0; y < g.h; ++y)
    for (std::size_t x = 0; x < g.w; ++x)
      if (g.at(y, x) == 1.0) {
        total += 1;
        sx += double(x) + 0.5;
        sy += double(y) + 0.5;
      }
  const double bx = total == 0 ? double(g.w) / 2 : sx / total;
  const double by = total == 0 ? double(g.h) / 2 : sy / total;
  const std::size_t cx = split_index(bx, g.w), cy = split_index(by, g.h);
  const double area = double(g.h * g.w);
  const double w1 = double(cx * cy) / area;
  const double w2 = double((g.w - cx) * cy) / area;
  const double w3 = double(cx * (g.h - cy)) / area;
  const double w4 = 1.0 - w1 - w2 - w3;
  return w1 * region_ssim(p, g, 0, cy, 0, cx) + w2 * region_ssim(p, g, 0, cy, cx, g.w) +
         w3 * region_ssim(p, g, cy, g.h, 0, cx) + w4 * region_ssim(p, g, cy, g.h, cx, g.w);
}

double structure(const Map& p, const Map& g) {
  const double y = mean_of(g.v);
  if (y == 0) return 1.0 - mean_of(p.v);
  if (y == 1) return mean_of(p.v);
  const double q = kStructureAlpha * s_object(p, g) + (1 - kStructureAlpha) * s_region(p, g);
  return std::clamp(q, 0.0, 1.0);
}

double threshold(std::size_t i) { return double(i) / 255.0; }

double enhanced_alignment(const Map& p, const Map& g, double t) {
  const std::size_t n = g.v.size();
  std::vector<double> fm(n);
  double fg = 0;
  for (std::size_t i = 0; i < n; ++i) {
    fm[i] = p.v[i] >= t ? 1.0 : 0.0;
    fg += g.v[i];
  }
  double sum = 0;
  if (fg == 0) {
    for (double f : fm) sum += 1.0 - f;
  } else if (fg == double(n)) {
    for (double f : fm) sum += f;
  } else {
    const double mf = mean_of(fm), mg = fg / double(n);
    for (std::size_t i = 0; i < n; ++i) {
      const double a = fm[i] - mf, b = g.v[i] - mg;
      const double phi = 2 * a * b / (a * a + b * b + kEps);
      sum += (phi + 1) * (phi + 1) / 4;
    }
  }
  return sum / double(n);
}

double f_beta(double p, double r) {
  if (p == 0 && r == 0) return 0;
  return (1 + kBetaSquared) * p * r / (kBetaSquared * p + r);
}

}  // namespace

SampleScores score_sample(const Tensor& pred, const Tensor& gt) {
  const auto [p, g] = checked_pair(pred, gt);
  SampleScores s;
  const std::size_t n = g.v.size();
  double positives = 0, err = 0;
  for (std::size_t i = 0; i < n; ++i) {
    positives += g.v[i];
    err += std::abs(p.v[i] - g.v[i]);
  }
  s.mae = err / double(n);
  s.empty_gt = positives == 0;
  s.s = structure(p, g);
  for (std::size_t k = 0; k < kThresholds; ++k) {
    const double t = threshold(k);
    double tp = 0, predicted = 0;
    for (std::size_t i = 0; i < n; ++i)
      if (p.v[i] >= t) {
        predicted += 1;
        tp += g.v[i];
      }
    s.precision[k] = predicted > 0 ? tp / predicted : 0.0;
    s.recall[k] = positives > 0 ? tp / positives : 0.0;
    s.enhanced[k] = enhanced_alignment(p, g, t);
  }
  return s;
}

double mae(const Tensor& pred, const Tensor& gt) { return score_sample(pred, gt).mae; }

double max_f_measure(const Tensor& pred, const Tensor& gt) {
  return aggregate({score_sample(pred, gt)}).max_f;
}

double s_measure(const Tensor& pred, const Tensor& gt) {
  const auto [p, g] = checked_pair(pred, gt);
  return structure(p, g);
}

double max_e_measure(const Tensor& pred, const Tensor& gt) {
  return aggregate({score_sample(pred, gt)}).max_e;
}

EvalResult aggregate(const std::vector<SampleScores>& scores) {
  if (scores.empty()) throw std::invalid_argument("cannot aggregate an empty evaluation set");
  EvalResult r;
  r.samples = scores.size();
  const double m = double(scores.size());
  for (const auto& s : scores) {
    r.mae += s.mae / m;
    r.s_measure += s.s / m;
  }
  for (std::size_t k = 0; k < kThresholds; ++k) {
    double p = 0, rc = 0, e = 0;
    for (const auto& s : scores) {
      p += s.precision[k];
      rc += s.recall[k];
      e += s.enhanced[k];
    }
    r.max_f = std::max(r.max_f, f_beta(p / m, rc / m));
    r.max_e = std::max(r.max_e, e / m);
  }
  return r;
}

void write_metrics_csv(const std::filesystem::path& path,
                       const std::vector<std::pair<std::string, EvalResult>>& rows) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot write " + path.string());
  os << "dataset,mae,max_f,s,max_e\n";
  char buf[256];
  for (const auto& [name, r] : rows) {
    std::snprintf(buf, sizeof buf, "%s,%.6f,%.6f,%.6f,%.6f\n", name.c_str(), r.mae, r.max_f,
                  r.s_measure, r.max_e);
    os << buf;
  }
}

std::string format_table(const std::vector<std::pair<std::string, EvalResult>>& rows) {
  std::size_t width = 7;
  for (const auto& row : rows) width = std::max(width, row.first.size());
  std::string out;
  char buf[256];
  std::snprintf(buf, sizeof buf, "%-*s  %7s  %7s  %7s  %7s\n", int(width), "dataset", "S", "maxF",
                "maxE", "MAE");
  out += buf;
  for (const auto& [name, r] : rows) {
    std::snprintf(buf, sizeof buf, "%-*s  %7.4f  %7.4f  %7.4f  %7.4f\n", int(width), name.c_str(),
                  r.s_measure, r.max_f, r.max_e, r.mae);
    out += buf;
  }
  return out;
}

DLGNET_NAMESPACE_END
