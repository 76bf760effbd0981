#include "divscope/util/csv.hpp"
#include "divscope/util/digest.hpp"
#include "divscope/util/io.hpp"
#include "divscope/util/stats.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>

#include "divscope/errors.hpp"

namespace divscope::util {

std::string to_hex(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

std::string Fnv1a64::hex() const { return to_hex(state_); }

std::string digest_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot read file for digest: " + path.string());
  Fnv1a64 h;
  char buf[1 << 16];
  while (in) {
    in.read(buf, sizeof(buf));
    h.update(buf, static_cast<std::size_t>(in.gcount()));
  }
  return h.hex();
}

std::vector<std::string> read_lines(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open file: " + path.string());
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    lines.push_back(line);
  }
  return lines;
}

std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open file: " + path.string());
  std::ostringstream out;
  out << in.rdbuf();
  return out.str();
}

void write_text(const std::filesystem::path& path, std::string_view content) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write file: " + path.string());
  out.write(content.data(), static_cast<std::streamsize>(content.size()));
  if (!out) throw DataError("short write: " + path.string());
}

std::vector<std::string> parse_csv_line(std::string_view line) {
  std::vector<std::string> fields;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    char c = line[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          cur.push_back('"');
          ++i;
        } else {
          quoted = false;
        }
      } else {
        cur.push_back(c);
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      fields.push_back(std::move(cur));
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  fields.push_back(std::move(cur));
  return fields;
}

double mean(std::span<const double> xs) {
  if (xs.empty()) return 0.0;
  double s = 0.0;
  for (double x : xs) s += x;
  return s / static_cast<double>(xs.size());
}

static double sum_sq_dev(std::span<const double> xs, double m) {
  double s = 0.0;
  for (double x : xs) s += (x - m) * (x - m);
  return s;
}

double sample_sd(std::span<const double> xs) {
  if (xs.size() < 2) throw NumericError("sample sd needs at least two values");
  double m = mean(xs);
  return std::sqrt(sum_sq_dev(xs, m) / static_cast<double>(xs.size() - 1));
}

double population_sd(std::span<const double> xs) {
  if (xs.empty()) return 0.0;
  double m = mean(xs);
  return std::sqrt(sum_sq_dev(xs, m) / static_cast<double>(xs.size()));
}

std::optional<std::vector<double>> zscore(std::span<const double> xs) {
  if (xs.size() < 2) return std::nullopt;
  double m = mean(xs);
  double sd = population_sd(xs);
  if (sd <= 0.0) return std::nullopt;
  std::vector<double> out(xs.size());
  for (std::size_t i = 0; i < xs.size(); ++i) out[i] = (xs[i] - m) / sd;
  return out;
}

std::vector<double> rolling_mean(std::span<const double> xs, std::size_t window) {
  if (window == 0) window = 1;
  std::vector<double> out(xs.size());
  double acc = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    acc += xs[i];
    if (i >= window) acc -= xs[i - window];
    std::size_t n = std::min(i + 1, window);
    out[i] = acc / static_cast<double>(n);
  }
  return out;
}

// Continued fraction for the incomplete beta (Lentz's method).
static double beta_cf(double a, double b, double x) {
  constexpr int kMaxIter = 300;
  constexpr double kEps = 3e-15;
  constexpr double kFpMin = 1e-300;
  double qab = a + b;
  double qap = a + 1.0;
  double qam = a - 1.0;
  double c = 1.0;
  double d = 1.0 - qab * x / qap;
  if (std::fabs(d) < kFpMin) d = kFpMin;
  d = 1.0 / d;
  double h = d;
  for (int m = 1; m <= kMaxIter; ++m) {
    int m2 = 2 * m;
    double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
    d = 1.0 + aa * d;
    if (std::fabs(d) < kFpMin) d = kFpMin;
    c = 1.0 + aa / c;
    if (std::fabs(c) < kFpMin) c = kFpMin;
    d = 1.0 / d;
    h *= d * c;
    aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
    d = 1.0 + aa * d;
    if (std::fabs(d) < kFpMin) d = kFpMin;
    c = 1.0 + aa / c;
    if (std::fabs(c) < kFpMin) c = kFpMin;
    d = 1.0 / d;
    double del = d * c;
    h *= del;
    if (std::fabs(del - 1.0) < kEps) return h;
  }
  throw NumericError("incomplete beta continued fraction did not converge");
}

double regularized_incomplete_beta(double a, double b, double x) {
  if (x <= 0.0) return 0.0;
  if (x >= 1.0) return 1.0;
  double ln_front = std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) +
                    a * std::log(x) + b * std::log1p(-x);
  double front = std::exp(ln_front);
  if (x < (a + 1.0) / (a + b + 2.0)) {
    return front * beta_cf(a, b, x) / a;
  }
  return 1.0 - front * beta_cf(b, a, 1.0 - x) / b;
}

double student_t_p_two_sided(double t, double df) {
  if (df <= 0.0) throw NumericError("degrees of freedom must be positive");
  if (!std::isfinite(t)) return 0.0;
  double x = df / (df + t * t);
  return regularized_incomplete_beta(df / 2.0, 0.5, x);
}

double student_t_critical(double df, double alpha) {
  if (alpha <= 0.0 || alpha >= 1.0) throw NumericError("alpha must be in (0,1)");
  double lo = 0.0, hi = 1.0;
  while (student_t_p_two_sided(hi, df) > alpha) {
    hi *= 2.0;
    if (hi > 1e12) throw NumericError("t critical value search diverged");
  }
  for (int i = 0; i < 200; ++i) {
    double mid = 0.5 * (lo + hi);
    if (student_t_p_two_sided(mid, df) > alpha) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return 0.5 * (lo + hi);
}

TrendFit linear_trend(std::span<const double> y) {
  TrendFit fit;
  std::size_t n = y.size();
  if (n < 3) throw NumericError("trend fit needs at least three points");
  double xm = (static_cast<double>(n) - 1.0) / 2.0;
  double ym = mean(y);
  double sxx = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    double dx = static_cast<double>(i) - xm;
    sxx += dx * dx;
    sxy += dx * (y[i] - ym);
  }
  fit.slope = sxy / sxx;
  fit.intercept = ym - fit.slope * xm;
  double ssr = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    double pred = fit.intercept + fit.slope * static_cast<double>(i);
    ssr += (y[i] - pred) * (y[i] - pred);
  }
  double sigma2 = ssr / static_cast<double>(n - 2);
  fit.slope_se = std::sqrt(sigma2 / sxx);
  return fit;
}

}  // namespace divscope::util
