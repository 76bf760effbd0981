#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "divscope/corpus.hpp"
#include "divscope/diversity.hpp"
#include "divscope/topics.hpp"

namespace divscope::panel {

struct PanelRow {
  std::string org;
  corpus::OrgKind kind = corpus::OrgKind::Unknown;
  int year = 0;
  std::string family;
  std::string paramset;
  double diversity_raw = 0.0;
  double diversity_z = 0.0;  // standardized within each family/paramset series
  bool is_company = false;
  std::size_t article_n = 0;
  double log_article_n = 0.0;
};

// One row per organisation-year and family/paramset. Organisations need at
// least min_papers articles inside the year span to qualify; organisation
// kind is the most frequent kind attached to the name.
std::vector<PanelRow> build_panel(const corpus::Corpus& corpus, const topics::TopicModel& model,
                                  const topics::PresenceMatrix& presence,
                                  const corpus::YearWindow& years, std::size_t min_papers = 75,
                                  const diversity::MetricOptions& options = {},
                                  unsigned threads = 1,
                                  std::vector<std::string>* warnings = nullptr);

struct RegressionFit {
  std::vector<std::string> names;
  Eigen::VectorXd beta;
  Eigen::VectorXd se;
  Eigen::VectorXd t;
  std::vector<double> p;  // two-sided
  double r2 = 0.0;
  std::size_t n = 0;
  std::size_t df = 0;
  bool year_fe = false;
  bool org_fe = false;
};

// Least squares via column-pivoted QR with homoskedastic standard errors.
// Rank deficiency raises DataError naming the collinear columns.
RegressionFit ols(const Eigen::MatrixXd& design, const Eigen::VectorXd& response,
                  std::vector<std::string> names);

// Eq-style panel fit for one family/paramset: intercept, the named
// regressors (is_comp, log_article_n, year) and optional year/organisation
// dummies with the earliest year and the lexicographically first
// organisation as references.
RegressionFit ols_fit(std::span<const PanelRow> rows, std::string_view response,
                      const std::vector<std::string>& regressors, bool year_fe, bool org_fe);

struct OrgEffect {
  std::string org;
  double effect = 0.0;
  double ci_low = 0.0;
  double ci_high = 0.0;
  std::size_t papers = 0;
  corpus::OrgKind kind = corpus::OrgKind::Unknown;
  bool reference = false;
};

// Organisation dummy coefficients with confidence intervals, sorted by
// effect; the reference organisation appears with effect zero.
std::vector<OrgEffect> org_fixed_effects_report(const RegressionFit& fit,
                                                std::span<const PanelRow> rows,
                                                double alpha = 0.05);

// Aligned text rendering in the three-row-per-regressor layout with
// significance stars at p < 0.01 / 0.05 / 0.1.
std::string render_fit_table(const std::string& family,
                             const std::vector<std::pair<std::string, RegressionFit>>& fits);

}  // namespace divscope::panel
