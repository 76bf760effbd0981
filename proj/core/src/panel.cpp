#include "divscope/panel.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <sstream>
#include <unordered_map>

#include "divscope/errors.hpp"
#include "divscope/util/csv.hpp"
#include "divscope/util/parallel.hpp"
#include "divscope/util/stats.hpp"

namespace divscope::panel {

std::vector<PanelRow> build_panel(const corpus::Corpus& corpus, const topics::TopicModel& model,
                                  const topics::PresenceMatrix& presence,
                                  const corpus::YearWindow& years, std::size_t min_papers,
                                  const diversity::MetricOptions& options, unsigned threads,
                                  std::vector<std::string>* warnings) {
  // Organisation -> model rows within the year span, plus kind votes.
  std::map<std::string, std::vector<std::size_t>> org_rows;
  std::map<std::string, std::map<corpus::OrgKind, std::size_t>> kind_votes;
  for (std::size_t r = 0; r < model.n_articles(); ++r) {
    if (model.years[r] < years.first || model.years[r] > years.last) continue;
    const corpus::Article* article = corpus.find(model.article_ids[r]);
    if (!article) continue;
    for (const auto& org : article->orgs) {
      org_rows[org.name].push_back(r);
      ++kind_votes[org.name][org.kind];
    }
  }
  std::vector<std::string> qualifying;
  for (const auto& [org, rows] : org_rows) {
    if (rows.size() >= min_papers) qualifying.push_back(org);
  }
  if (qualifying.empty()) {
    throw DataError("no organisation reaches " + std::to_string(min_papers) +
                    " articles in " + years.label());
  }

  struct Cell {
    std::string org;
    corpus::OrgKind kind;
    int year;
    std::size_t article_n;
    std::vector<std::optional<double>> values;
  };
  std::vector<Cell> cells;
  for (const auto& org : qualifying) {
    corpus::OrgKind kind = corpus::OrgKind::Unknown;
    std::size_t best = 0;
    for (const auto& [k, votes] : kind_votes[org]) {
      if (votes > best) {
        best = votes;
        kind = k;
      }
    }
    std::map<int, std::vector<std::size_t>> by_year;
    for (auto r : org_rows[org]) by_year[model.years[r]].push_back(r);
    for (auto& [year, rows] : by_year) {
      cells.push_back({org, kind, year, rows.size(), {}});
    }
  }
  std::unordered_map<std::string, const std::vector<std::size_t>*> row_lookup;
  for (const auto& [org, rows] : org_rows) row_lookup.emplace(org, &rows);

  util::for_each_chunk(cells.size(), 1, threads, [&](const util::ChunkRange& range) {
    for (std::size_t i = range.begin; i < range.end; ++i) {
      auto& cell = cells[i];
      std::vector<std::size_t> rows;
      for (auto r : *row_lookup.at(cell.org)) {
        if (model.years[r] == cell.year) rows.push_back(r);
      }
      cell.values = diversity::metric_suite(model, presence, rows, options, nullptr);
    }
  });

  const auto& sets = diversity::all_paramsets();
  std::vector<PanelRow> panel;
  for (std::size_t s = 0; s < sets.size(); ++s) {
    std::vector<std::size_t> cell_idx;
    std::vector<double> raws;
    for (std::size_t i = 0; i < cells.size(); ++i) {
      if (cells[i].values[s]) {
        cell_idx.push_back(i);
        raws.push_back(*cells[i].values[s]);
      } else if (warnings) {
        warnings->push_back(cells[i].org + "/" + std::to_string(cells[i].year) + ": " +
                            sets[s].family + " set " + sets[s].paramset +
                            " undefined (fewer than two topics present)");
      }
    }
    auto z = util::zscore(raws);
    if (!z && warnings && !raws.empty()) {
      warnings->push_back(sets[s].family + " set " + sets[s].paramset +
                          ": constant series, z-scores set to zero");
    }
    for (std::size_t j = 0; j < cell_idx.size(); ++j) {
      const auto& cell = cells[cell_idx[j]];
      PanelRow row;
      row.org = cell.org;
      row.kind = cell.kind;
      row.year = cell.year;
      row.family = sets[s].family;
      row.paramset = sets[s].paramset;
      row.diversity_raw = raws[j];
      row.diversity_z = z ? (*z)[j] : 0.0;
      row.is_company = cell.kind == corpus::OrgKind::Company;
      row.article_n = cell.article_n;
      row.log_article_n = std::log(static_cast<double>(cell.article_n));
      panel.push_back(std::move(row));
    }
  }
  return panel;
}

RegressionFit ols(const Eigen::MatrixXd& design, const Eigen::VectorXd& response,
                  std::vector<std::string> names) {
  const auto n = design.rows();
  const auto p = design.cols();
  if (n != response.size()) throw DataError("design and response row counts differ");
  if (static_cast<std::size_t>(p) != names.size()) {
    throw DataError("design column count does not match the name list");
  }
  if (n <= p) throw DataError("not enough observations for the design");

  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(design);
  qr.setThreshold(1e-10);
  if (qr.rank() < p) {
    const auto& perm = qr.colsPermutation().indices();
    std::string collinear;
    for (Eigen::Index i = qr.rank(); i < p; ++i) {
      if (!collinear.empty()) collinear += ", ";
      collinear += names[static_cast<std::size_t>(perm[i])];
    }
    throw DataError("design matrix is rank deficient; collinear columns: " + collinear);
  }

  RegressionFit fit;
  fit.names = std::move(names);
  fit.beta = qr.solve(response);
  Eigen::VectorXd residuals = response - design * fit.beta;
  double ssr = residuals.squaredNorm();
  double mean_y = response.mean();
  double sst = (response.array() - mean_y).square().sum();
  fit.n = static_cast<std::size_t>(n);
  fit.df = static_cast<std::size_t>(n - p);
  double sigma2 = ssr / static_cast<double>(fit.df);
  // (X'X)^-1 from the R factor of the pivoted decomposition.
  Eigen::MatrixXd r = qr.matrixR().topLeftCorner(p, p).template triangularView<Eigen::Upper>();
  Eigen::MatrixXd rinv = r.inverse();
  Eigen::MatrixXd xtx_inv_perm = rinv * rinv.transpose();
  Eigen::MatrixXd perm = qr.colsPermutation();
  Eigen::MatrixXd xtx_inv = perm * xtx_inv_perm * perm.transpose();
  fit.se.resize(p);
  fit.t.resize(p);
  fit.p.resize(static_cast<std::size_t>(p));
  for (Eigen::Index i = 0; i < p; ++i) {
    fit.se[i] = std::sqrt(std::max(0.0, sigma2 * xtx_inv(i, i)));
    fit.t[i] = fit.se[i] > 0.0 ? fit.beta[i] / fit.se[i] : 0.0;
    fit.p[static_cast<std::size_t>(i)] =
        fit.se[i] > 0.0 ? util::student_t_p_two_sided(fit.t[i], static_cast<double>(fit.df))
                        : 0.0;
  }
  fit.r2 = sst > 0.0 ? 1.0 - ssr / sst : 1.0;
  return fit;
}

RegressionFit ols_fit(std::span<const PanelRow> rows, std::string_view response,
                      const std::vector<std::string>& regressors, bool year_fe, bool org_fe) {
  if (rows.empty()) throw DataError("cannot fit a regression on an empty panel");
  std::set<int> years;
  std::set<std::string> orgs;
  for (const auto& r : rows) {
    years.insert(r.year);
    orgs.insert(r.org);
  }
  int base_year = *years.begin();              // reference: earliest year
  const std::string& base_org = *orgs.begin();  // reference: first org

  std::vector<std::string> names;
  names.push_back("intercept");
  for (const auto& reg : regressors) {
    if (reg != "is_comp" && reg != "log_article_n" && reg != "year") {
      throw ConfigError("unknown regressor '" + reg + "'");
    }
    names.push_back(reg);
  }
  std::vector<int> year_cols;
  if (year_fe) {
    for (int y : years) {
      if (y == base_year) continue;
      year_cols.push_back(y);
      names.push_back("year:" + std::to_string(y));
    }
  }
  std::vector<std::string> org_cols;
  if (org_fe) {
    for (const auto& o : orgs) {
      if (o == base_org) continue;
      org_cols.push_back(o);
      names.push_back("org:" + o);
    }
  }

  const std::size_t n = rows.size();
  const std::size_t p = names.size();
  Eigen::MatrixXd design = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n),
                                                 static_cast<Eigen::Index>(p));
  Eigen::VectorXd y(static_cast<Eigen::Index>(n));
  std::unordered_map<std::string, std::size_t> org_col_index;
  for (std::size_t i = 0; i < org_cols.size(); ++i) org_col_index.emplace(org_cols[i], i);
  for (std::size_t i = 0; i < n; ++i) {
    const auto& row = rows[i];
    y[static_cast<Eigen::Index>(i)] = response == "raw" ? row.diversity_raw : row.diversity_z;
    std::size_t c = 0;
    design(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(c++)) = 1.0;
    for (const auto& reg : regressors) {
      double v = 0.0;
      if (reg == "is_comp") {
        v = row.is_company ? 1.0 : 0.0;
      } else if (reg == "log_article_n") {
        v = row.log_article_n;
      } else {  // linear year, centred on the reference year
        v = static_cast<double>(row.year - base_year);
      }
      design(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(c++)) = v;
    }
    for (int yc : year_cols) {
      design(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(c++)) =
          row.year == yc ? 1.0 : 0.0;
    }
    if (org_fe && row.org != base_org) {
      std::size_t oc = org_col_index.at(row.org);
      design(static_cast<Eigen::Index>(i),
             static_cast<Eigen::Index>(1 + regressors.size() + year_cols.size() + oc)) = 1.0;
    }
  }
  RegressionFit fit = ols(design, y, std::move(names));
  fit.year_fe = year_fe;
  fit.org_fe = org_fe;
  return fit;
}

std::vector<OrgEffect> org_fixed_effects_report(const RegressionFit& fit,
                                                std::span<const PanelRow> rows, double alpha) {
  if (!fit.org_fe) throw DataError("fit has no organisation fixed effects");
  std::map<std::string, std::pair<std::size_t, corpus::OrgKind>> meta;
  std::set<std::string> orgs;
  for (const auto& r : rows) {
    orgs.insert(r.org);
    auto& m = meta[r.org];
    m.first += r.article_n;
    m.second = r.kind;
  }
  double tcrit = util::student_t_critical(static_cast<double>(fit.df), alpha);
  std::vector<OrgEffect> effects;
  std::set<std::string> with_dummy;
  for (std::size_t i = 0; i < fit.names.size(); ++i) {
    if (fit.names[i].rfind("org:", 0) != 0) continue;
    OrgEffect e;
    e.org = fit.names[i].substr(4);
    with_dummy.insert(e.org);
    e.effect = fit.beta[static_cast<Eigen::Index>(i)];
    double half = tcrit * fit.se[static_cast<Eigen::Index>(i)];
    e.ci_low = e.effect - half;
    e.ci_high = e.effect + half;
    e.papers = meta[e.org].first;
    e.kind = meta[e.org].second;
    effects.push_back(std::move(e));
  }
  for (const auto& org : orgs) {
    if (with_dummy.count(org)) continue;
    OrgEffect e;  // reference organisation: zero by normalization
    e.org = org;
    e.reference = true;
    e.papers = meta[org].first;
    e.kind = meta[org].second;
    effects.push_back(std::move(e));
  }
  std::sort(effects.begin(), effects.end(), [](const OrgEffect& a, const OrgEffect& b) {
    if (a.effect != b.effect) return a.effect < b.effect;
    return a.org < b.org;
  });
  return effects;
}

namespace {

std::string stars(double p) {
  if (p < 0.01) return "***";
  if (p < 0.05) return "**";
  if (p < 0.1) return "*";
  return "";
}

std::string fmt2(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.2f", v);
  return buf;
}

}  // namespace

std::string render_fit_table(const std::string& family,
                             const std::vector<std::pair<std::string, RegressionFit>>& fits) {
  // Rows: coefficient and t-value per displayed regressor, then R2, N, FE.
  const std::vector<std::pair<std::string, std::string>> display = {
      {"is_comp", "Company index"},
      {"log_article_n", "Number of papers (log)"},
      {"year", "Year"},
  };
  std::vector<std::vector<std::string>> grid;
  std::vector<std::string> header{family};
  for (const auto& [label, _] : fits) header.push_back(label);
  grid.push_back(header);
  for (const auto& [name, label] : display) {
    std::vector<std::string> coef{label};
    std::vector<std::string> tval{""};
    bool any = false;
    for (const auto& [_, fit] : fits) {
      auto it = std::find(fit.names.begin(), fit.names.end(), name);
      if (it == fit.names.end()) {
        coef.push_back("");
        tval.push_back("");
        continue;
      }
      any = true;
      auto i = static_cast<Eigen::Index>(it - fit.names.begin());
      coef.push_back(fmt2(fit.beta[i]) + stars(fit.p[static_cast<std::size_t>(i)]));
      tval.push_back("(" + fmt2(fit.t[i]) + ")");
    }
    if (any) {
      grid.push_back(coef);
      grid.push_back(tval);
    }
  }
  std::vector<std::string> r2{"R2"}, nrow{"N"}, fe{"Fixed Effects"};
  for (const auto& [_, fit] : fits) {
    r2.push_back(fmt2(fit.r2));
    nrow.push_back(std::to_string(fit.n));
    fe.push_back(fit.org_fe ? "Yes" : "No");
  }
  grid.push_back(r2);
  grid.push_back(nrow);
  grid.push_back(fe);

  std::vector<std::size_t> width(grid[0].size(), 0);
  for (const auto& row : grid) {
    for (std::size_t c = 0; c < row.size(); ++c) width[c] = std::max(width[c], row[c].size());
  }
  std::ostringstream out;
  for (const auto& row : grid) {
    for (std::size_t c = 0; c < row.size(); ++c) {
      if (c > 0) out << "  ";
      out << std::string(width[c] - row[c].size(), ' ') << row[c];
    }
    out << '\n';
  }
  return out.str();
}

}  // namespace divscope::panel
