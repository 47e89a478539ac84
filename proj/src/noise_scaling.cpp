#include "polariton/noise_scaling.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>

#include <Eigen/Dense>

#include "polariton/error.hpp"
#include "polariton/random.hpp"
#include "polariton/statistics.hpp"

namespace polariton {

void NoiseScanConfig::validate() const {
  if (atom_numbers.empty()) throw std::invalid_argument("atom_numbers must be nonempty");
  for (std::size_t i = 0; i < atom_numbers.size(); ++i) {
    if (!(atom_numbers[i] >= 0.0)) throw std::invalid_argument("atom numbers must be >= 0");
    if (i > 0 && !(atom_numbers[i] > atom_numbers[i - 1])) {
      throw std::invalid_argument("atom_numbers must be strictly increasing");
    }
  }
  if (shots_per_point < 2) throw std::invalid_argument("shots_per_point must be >= 2");
  for (double c : {shot_noise_var, projection_coeff, technical_coeff, preparation_jitter}) {
    if (!(c >= 0.0)) throw std::invalid_argument("noise coefficients must be >= 0");
  }
}

double NoiseScanConfig::model_variance(double n_atoms) const {
  return shot_noise_var + projection_coeff * n_atoms +
         (technical_coeff + preparation_jitter) * n_atoms * n_atoms;
}

std::vector<double> linear_grid(double max_atoms, std::size_t points) {
  if (points < 2) throw std::invalid_argument("grid needs at least two points");
  std::vector<double> grid(points);
  for (std::size_t i = 0; i < points; ++i) {
    grid[i] = max_atoms * static_cast<double>(i) / static_cast<double>(points - 1);
  }
  return grid;
}

NoiseScanConfig reference_noise_config() {
  NoiseScanConfig c;
  c.atom_numbers = linear_grid(1e5, 6);
  c.shots_per_point = 10000;
  c.shot_noise_var = 1.0;
  c.projection_coeff = 1.5e-5;
  // Quadratic total 5/14 * 1e-10 puts the atomic share at 1e5 atoms at 0.65.
  c.technical_coeff = 2.5e-11;
  c.preparation_jitter = 1.5e-10 / 14.0;
  return c;
}

double reference_efficiency() {
  const auto c = reference_noise_config();
  const double na = c.atom_numbers.back();
  return tomography_efficiency(c.model_variance(na), c.model_variance(0.0));
}

std::vector<ScanPoint> simulate_noise_scan(const NoiseScanConfig& config, std::uint64_t seed) {
  config.validate();
  std::vector<ScanPoint> scan;
  scan.reserve(config.atom_numbers.size());
  const auto m = static_cast<double>(config.shots_per_point);
  for (std::size_t i = 0; i < config.atom_numbers.size(); ++i) {
    const double na = config.atom_numbers[i];
    const double sigma = std::sqrt(config.model_variance(na));
    Rng rng(derive_seed(seed, i, 0));
    double mean = 0.0;
    double m2 = 0.0;
    for (std::size_t s = 0; s < config.shots_per_point; ++s) {
      const double v = sigma * rng.standard_normal();
      const double delta = v - mean;
      mean += delta / static_cast<double>(s + 1);
      m2 += delta * (v - mean);
    }
    const double var = m2 / (m - 1.0);
    scan.push_back({na, var, std::sqrt(2.0 / (m - 1.0)) * var});
  }
  return scan;
}

double QuadraticFit::evaluate(double n_atoms) const {
  return coeffs[0] + coeffs[1] * n_atoms + coeffs[2] * n_atoms * n_atoms;
}

namespace {

struct SubsetFit {
  std::array<double, 3> beta{};
  Eigen::Matrix3d cov = Eigen::Matrix3d::Zero();
  double rss = std::numeric_limits<double>::infinity();
  bool ok = false;
};

// Weighted LS restricted to the coefficients flagged in `free_mask`; the
// design columns are Na/scale powers so the normal matrix stays well scaled.
SubsetFit solve_subset(const Eigen::MatrixXd& design, const Eigen::VectorXd& y,
                       const Eigen::VectorXd& w, unsigned free_mask) {
  std::vector<int> cols;
  for (int j = 0; j < 3; ++j) {
    if (free_mask & (1u << j)) cols.push_back(j);
  }
  SubsetFit out;
  const auto rows = design.rows();
  const auto k = static_cast<Eigen::Index>(cols.size());
  Eigen::VectorXd wy = y.cwiseProduct(w);
  if (k == 0) {
    out.rss = wy.squaredNorm();
    out.ok = true;
    return out;
  }
  Eigen::MatrixXd a(rows, k);
  for (Eigen::Index c = 0; c < k; ++c) a.col(c) = design.col(cols[static_cast<std::size_t>(c)]).cwiseProduct(w);
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(a);
  qr.setThreshold(1e-12);
  if (qr.rank() < k) return out;
  const Eigen::VectorXd beta = qr.solve(wy);
  const Eigen::MatrixXd normal_inv = (a.transpose() * a).inverse();
  for (Eigen::Index c = 0; c < k; ++c) {
    out.beta[static_cast<std::size_t>(cols[static_cast<std::size_t>(c)])] = beta[c];
    for (Eigen::Index d = 0; d < k; ++d) {
      out.cov(cols[static_cast<std::size_t>(c)], cols[static_cast<std::size_t>(d)]) = normal_inv(c, d);
    }
  }
  out.rss = (a * beta - wy).squaredNorm();
  out.ok = true;
  return out;
}

}  // namespace

QuadraticFit fit_quadratic(std::span<const ScanPoint> scan, FitMode mode) {
  if (scan.size() < 4) {
    throw std::invalid_argument("quadratic fit needs at least 4 scan points, got " +
                                std::to_string(scan.size()));
  }
  const auto rows = static_cast<Eigen::Index>(scan.size());
  bool weighted = true;
  double scale = 0.0;
  for (const auto& p : scan) {
    if (!(p.std_error > 0.0)) weighted = false;
    scale = std::max(scale, std::abs(p.n_atoms));
  }
  if (scale == 0.0) scale = 1.0;

  Eigen::MatrixXd design(rows, 3);
  Eigen::VectorXd y(rows);
  Eigen::VectorXd w(rows);
  for (Eigen::Index i = 0; i < rows; ++i) {
    const auto& p = scan[static_cast<std::size_t>(i)];
    const double t = p.n_atoms / scale;
    design(i, 0) = 1.0;
    design(i, 1) = t;
    design(i, 2) = t * t;
    y[i] = p.variance;
    w[i] = weighted ? 1.0 / p.std_error : 1.0;
  }

  const SubsetFit full = solve_subset(design, y, w, 0b111);
  if (!full.ok) throw DegenerateDesign("scan does not determine a quadratic (rank < 3)");

  SubsetFit best = full;
  unsigned best_mask = 0b111;
  const bool feasible = std::all_of(full.beta.begin(), full.beta.end(),
                                    [](double b) { return b >= 0.0; });
  if (mode == FitMode::non_negative && !feasible) {
    // Exact active-set solution: among subsets of free coefficients whose
    // unconstrained refit is non-negative, keep the lowest residual.
    best = SubsetFit{};
    for (unsigned mask = 0; mask < 0b111; ++mask) {
      const SubsetFit f = solve_subset(design, y, w, mask);
      if (!f.ok) continue;
      const bool ok = std::all_of(f.beta.begin(), f.beta.end(), [](double b) { return b >= 0.0; });
      if (ok && f.rss < best.rss) {
        best = f;
        best_mask = mask;
      }
    }
  }

  QuadraticFit fit;
  fit.weighted = weighted;
  const int free_count = std::popcount(best_mask);
  double cov_scale = 1.0;
  if (!weighted) {
    const auto dof = static_cast<double>(rows - free_count);
    cov_scale = dof > 0.0 ? best.rss / dof : 0.0;
  }
  for (int j = 0; j < 3; ++j) {
    fit.coeffs[static_cast<std::size_t>(j)] = best.beta[static_cast<std::size_t>(j)] / std::pow(scale, j);
    fit.clipped[static_cast<std::size_t>(j)] = !(best_mask & (1u << j));
    for (int k = 0; k < 3; ++k) {
      fit.covariance[static_cast<std::size_t>(j)][static_cast<std::size_t>(k)] =
          cov_scale * best.cov(j, k) / (std::pow(scale, j) * std::pow(scale, k));
    }
  }
  fit.residuals.reserve(scan.size());
  for (const auto& p : scan) fit.residuals.push_back(p.variance - fit.evaluate(p.n_atoms));
  return fit;
}

std::vector<NoiseFractions> decompose_noise(const QuadraticFit& fit,
                                            std::span<const ScanPoint> scan) {
  std::vector<NoiseFractions> out;
  out.reserve(scan.size());
  for (const auto& p : scan) {
    const double na = p.n_atoms;
    const double shot = fit.c0();
    const double proj = fit.c1() * na;
    const double tech = fit.c2() * na * na;
    const double total = shot + proj + tech;
    NoiseFractions f{na, 1.0, 0.0, 0.0};
    if (total > 0.0) {
      f.shot = shot / total;
      f.projection = proj / total;
      f.technical = tech / total;
    }
    out.push_back(f);
  }
  return out;
}

double tomography_efficiency(double var_with_atoms, double var_no_atoms) {
  if (!(var_no_atoms >= 0.0) || !(var_with_atoms >= var_no_atoms) || !(var_with_atoms > 0.0)) {
    throw std::invalid_argument(
        "tomography_efficiency needs var_with_atoms >= var_no_atoms >= 0 and var_with_atoms > 0");
  }
  return (var_with_atoms - var_no_atoms) / var_with_atoms;
}

namespace {

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) {
    const auto b = cell.find_first_not_of(" \t\r");
    const auto e = cell.find_last_not_of(" \t\r");
    out.push_back(b == std::string::npos ? "" : cell.substr(b, e - b + 1));
  }
  return out;
}

}  // namespace

std::vector<ScanPoint> read_scan_csv(std::istream& in, bool& has_std_error) {
  std::string line;
  std::vector<std::string> header;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#' || line.find_first_not_of(" \t\r") == std::string::npos) {
      continue;
    }
    header = split_csv(line);
    break;
  }
  if (header.size() < 2 || header[0] != "na" || header[1] != "variance" ||
      (header.size() == 3 && header[2] != "stderr") || header.size() > 3) {
    throw std::invalid_argument("scan CSV header must be 'na,variance' or 'na,variance,stderr'");
  }
  has_std_error = header.size() == 3;
  std::vector<ScanPoint> scan;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#' || line.find_first_not_of(" \t\r") == std::string::npos) {
      continue;
    }
    const auto cells = split_csv(line);
    if (cells.size() != header.size()) {
      throw std::invalid_argument("scan CSV row " + std::to_string(line_no) + " has " +
                                  std::to_string(cells.size()) + " fields");
    }
    try {
      ScanPoint p;
      p.n_atoms = std::stod(cells[0]);
      p.variance = std::stod(cells[1]);
      if (has_std_error) p.std_error = std::stod(cells[2]);
      scan.push_back(p);
    } catch (const std::logic_error&) {
      throw std::invalid_argument("scan CSV row " + std::to_string(line_no) + " is not numeric");
    }
  }
  return scan;
}

void write_scan_csv(std::ostream& out, std::span<const ScanPoint> scan) {
  out << "# schema_version=" << kSchemaVersion << '\n';
  out << "na,variance,stderr\n";
  for (const auto& p : scan) {
    out << format_double(p.n_atoms) << ',' << format_double(p.variance) << ','
        << format_double(p.std_error) << '\n';
  }
}

nlohmann::json to_json(const QuadraticFit& fit, std::span<const ScanPoint> scan) {
  nlohmann::json per_point = nlohmann::json::array();
  const auto fractions = decompose_noise(fit, scan);
  for (std::size_t i = 0; i < scan.size(); ++i) {
    per_point.push_back({{"na", scan[i].n_atoms},
                         {"variance", scan[i].variance},
                         {"stderr", scan[i].std_error},
                         {"fitted", fit.evaluate(scan[i].n_atoms)},
                         {"residual", fit.residuals[i]},
                         {"shot_fraction", fractions[i].shot},
                         {"projection_fraction", fractions[i].projection},
                         {"technical_fraction", fractions[i].technical}});
  }
  nlohmann::json cov = nlohmann::json::array();
  for (const auto& row : fit.covariance) cov.push_back(row);
  return {{"schema_version", kSchemaVersion},
          {"c0", fit.c0()},
          {"c1", fit.c1()},
          {"c2", fit.c2()},
          {"covariance", std::move(cov)},
          {"clipped", fit.clipped},
          {"weighted", fit.weighted},
          {"per_point", std::move(per_point)}};
}

}  // namespace polariton
