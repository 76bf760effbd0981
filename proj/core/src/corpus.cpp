#include "divscope/corpus.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <fstream>
#include <map>
#include <mutex>
#include <set>
#include <sstream>

#include "divscope/errors.hpp"
#include "divscope/util/csv.hpp"
#include "divscope/util/io.hpp"
#include "divscope/util/parallel.hpp"

#include "json.hpp"

namespace divscope::corpus {

namespace {

using nlohmann::ordered_json;

constexpr std::array<std::string_view, 8> kKindNames = {
    "Company", "Education", "Facility", "Government",
    "Nonprofit", "Healthcare", "Other", "Unknown"};

std::string lowercase(std::string_view s) {
  std::string out(s);
  for (char& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

}  // namespace

OrgKind parse_org_kind(std::string_view s) {
  std::string low = lowercase(s);
  for (std::size_t i = 0; i < kKindNames.size(); ++i) {
    if (low == lowercase(kKindNames[i])) return static_cast<OrgKind>(i);
  }
  return OrgKind::Unknown;
}

std::string_view org_kind_name(OrgKind kind) {
  return kKindNames[static_cast<std::size_t>(kind)];
}

std::optional<Date> Date::parse(std::string_view iso) {
  // Accepts YYYY-MM-DD, optionally followed by a time suffix.
  if (iso.size() < 10) return std::nullopt;
  auto digit = [&](std::size_t i) { return iso[i] >= '0' && iso[i] <= '9'; };
  for (std::size_t i : {0u, 1u, 2u, 3u, 5u, 6u, 8u, 9u}) {
    if (!digit(i)) return std::nullopt;
  }
  if (iso[4] != '-' || iso[7] != '-') return std::nullopt;
  if (iso.size() > 10 && iso[10] != 'T' && iso[10] != ' ') return std::nullopt;
  Date d;
  d.year = (iso[0] - '0') * 1000 + (iso[1] - '0') * 100 + (iso[2] - '0') * 10 + (iso[3] - '0');
  d.month = (iso[5] - '0') * 10 + (iso[6] - '0');
  d.day = (iso[8] - '0') * 10 + (iso[9] - '0');
  if (d.year < 1000 || d.month < 1 || d.month > 12 || d.day < 1) return std::nullopt;
  static constexpr int days_in_month[] = {31, 28, 31, 30, 31, 30, 31, 31, 30, 31, 30, 31};
  int max_day = days_in_month[d.month - 1];
  bool leap = (d.year % 4 == 0 && d.year % 100 != 0) || d.year % 400 == 0;
  if (d.month == 2 && leap) max_day = 29;
  if (d.day > max_day) return std::nullopt;
  return d;
}

std::string Date::str() const {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "%04d-%02d-%02d", year, month, day);
  return buf;
}

bool Article::involves_kind(OrgKind kind) const {
  return std::any_of(orgs.begin(), orgs.end(), [&](const Org& o) { return o.kind == kind; });
}

bool Article::has_category(std::string_view cat) const {
  return std::binary_search(categories.begin(), categories.end(), cat);
}

bool Article::in_archive(std::string_view archive) const {
  for (const auto& c : categories) {
    if (c == archive) return true;
    if (c.size() > archive.size() && c.compare(0, archive.size(), archive) == 0 &&
        c[archive.size()] == '.') {
      return true;
    }
  }
  return false;
}

Corpus Corpus::from_articles(std::vector<Article> articles) {
  Corpus c;
  c.articles_ = std::move(articles);
  std::sort(c.articles_.begin(), c.articles_.end(),
            [](const Article& a, const Article& b) { return a.id < b.id; });
  for (std::size_t i = 1; i < c.articles_.size(); ++i) {
    if (c.articles_[i].id == c.articles_[i - 1].id) {
      throw DataError("duplicate article id: " + c.articles_[i].id);
    }
  }
  c.reindex();
  return c;
}

void Corpus::reindex() {
  index_.clear();
  index_.reserve(articles_.size());
  for (std::size_t i = 0; i < articles_.size(); ++i) index_.emplace(articles_[i].id, i);
}

const Article* Corpus::find(std::string_view id) const {
  auto it = index_.find(std::string(id));
  return it == index_.end() ? nullptr : &articles_[it->second];
}

std::optional<std::size_t> Corpus::index_of(std::string_view id) const {
  auto it = index_.find(std::string(id));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

namespace {

void sort_unique_categories(std::vector<std::string>& cats) {
  std::sort(cats.begin(), cats.end());
  cats.erase(std::unique(cats.begin(), cats.end()), cats.end());
}

void sort_unique_orgs(std::vector<Org>& orgs) {
  std::sort(orgs.begin(), orgs.end());
  orgs.erase(std::unique(orgs.begin(), orgs.end()), orgs.end());
}

struct ParsedLine {
  std::optional<Article> article;
  std::string diagnostic;
  std::vector<std::string> warnings;
};

ParsedLine parse_article_line(const std::string& line, std::size_t line_no) {
  ParsedLine out;
  nlohmann::json j = nlohmann::json::parse(line, nullptr, /*allow_exceptions=*/false);
  if (j.is_discarded() || !j.is_object()) {
    out.diagnostic = "line " + std::to_string(line_no) + ": invalid JSON record";
    return out;
  }
  if (!j.contains("id") || !j["id"].is_string() || j["id"].get<std::string>().empty()) {
    out.diagnostic = "line " + std::to_string(line_no) + ": missing or empty id";
    return out;
  }
  Article a;
  a.id = j["id"].get<std::string>();
  std::string created = j.value("created", std::string());
  auto date = Date::parse(created);
  if (!date) {
    out.diagnostic = "line " + std::to_string(line_no) + ": article " + a.id +
                     ": unparseable created date '" + created + "'";
    return out;
  }
  a.created = *date;
  if (j.contains("categories")) {
    if (!j["categories"].is_array()) {
      out.diagnostic = "line " + std::to_string(line_no) + ": article " + a.id +
                       ": categories must be an array";
      return out;
    }
    for (const auto& c : j["categories"]) {
      if (c.is_string() && !c.get<std::string>().empty()) a.categories.push_back(c);
    }
  }
  sort_unique_categories(a.categories);
  a.abstract_text = j.value("abstract", std::string());
  if (j.contains("orgs") && j["orgs"].is_array()) {
    for (const auto& o : j["orgs"]) {
      if (!o.is_object() || !o.contains("name") || !o["name"].is_string()) {
        out.warnings.push_back("article " + a.id + ": skipping org entry without a name");
        continue;
      }
      Org org;
      org.name = o["name"].get<std::string>();
      if (org.name.empty()) {
        out.warnings.push_back("article " + a.id + ": skipping org entry with empty name");
        continue;
      }
      org.kind = o.contains("kind") && o["kind"].is_string()
                     ? parse_org_kind(o["kind"].get<std::string>())
                     : OrgKind::Unknown;
      a.orgs.push_back(std::move(org));
    }
  }
  sort_unique_orgs(a.orgs);
  out.article = std::move(a);
  return out;
}

}  // namespace

Corpus load_articles(const std::filesystem::path& path, LoadReport* report, unsigned threads,
                     ArticleFormat format) {
  if (format != ArticleFormat::JsonLines) throw ConfigError("unsupported article format");
  auto lines = util::read_lines(path);
  std::vector<ParsedLine> parsed(lines.size());
  util::for_each_chunk(lines.size(), util::kDefaultGrain, threads,
                       [&](const util::ChunkRange& r) {
                         for (std::size_t i = r.begin; i < r.end; ++i) {
                           if (lines[i].empty()) continue;
                           parsed[i] = parse_article_line(lines[i], i + 1);
                         }
                       });
  std::vector<Article> articles;
  LoadReport local;
  for (auto& p : parsed) {
    for (auto& w : p.warnings) local.warnings.push_back(std::move(w));
    if (!p.diagnostic.empty()) {
      local.rejected.push_back(std::move(p.diagnostic));
      continue;
    }
    if (p.article) {
      if (!p.article->has_abstract()) ++local.empty_abstracts;
      articles.push_back(std::move(*p.article));
    }
  }
  Corpus corpus = Corpus::from_articles(std::move(articles));
  local.loaded = corpus.size();
  if (report) *report = std::move(local);
  return corpus;
}

CorpusSlice CorpusSlice::from_ids(const Corpus& corpus, std::string description,
                                  std::vector<std::string> ids) {
  std::sort(ids.begin(), ids.end());
  ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
  for (const auto& id : ids) {
    if (!corpus.find(id)) {
      throw DataError("slice '" + description + "' references unknown article id " + id);
    }
  }
  return CorpusSlice{std::move(description), std::move(ids)};
}

CorpusSlice CorpusSlice::filter(const Corpus& corpus, std::string description,
                                const std::function<bool(const Article&)>& predicate) {
  CorpusSlice slice;
  slice.description = std::move(description);
  for (const auto& article : corpus.articles()) {
    if (predicate(article)) slice.ids.push_back(article.id);
  }
  return slice;
}

std::string dedup_org_name(std::string_view raw) {
  std::string_view s = raw;
  auto paren = s.find('(');
  if (paren != std::string_view::npos) s = s.substr(0, paren);
  auto first = s.find_first_not_of(" \t");
  auto last = s.find_last_not_of(" \t");
  if (first == std::string_view::npos) {
    // Nothing left before the parenthesis; keep the trimmed original rather
    // than inventing an empty name.
    s = raw;
    first = s.find_first_not_of(" \t");
    last = s.find_last_not_of(" \t");
    if (first == std::string_view::npos) return std::string();
  }
  return std::string(s.substr(first, last - first + 1));
}

void dedup_org_names(Corpus& corpus) {
  for (auto& article : corpus.mutable_articles()) {
    for (auto& org : article.orgs) org.name = dedup_org_name(org.name);
    sort_unique_orgs(article.orgs);
    // Same name surviving with several kinds collapses to the first kind in
    // enum order so the pair set stays a function of the name.
    std::vector<Org> collapsed;
    for (auto& org : article.orgs) {
      if (!collapsed.empty() && collapsed.back().name == org.name) continue;
      collapsed.push_back(org);
    }
    article.orgs = std::move(collapsed);
  }
}

std::vector<OverrideDirective> load_overrides(const std::filesystem::path& path) {
  auto lines = util::read_lines(path);
  std::vector<OverrideDirective> out;
  for (std::size_t i = 0; i < lines.size(); ++i) {
    if (lines[i].empty()) continue;
    nlohmann::json j = nlohmann::json::parse(lines[i], nullptr, false);
    if (j.is_discarded() || !j.is_object() || !j.contains("id")) {
      throw DataError("override file line " + std::to_string(i + 1) + ": invalid directive");
    }
    OverrideDirective d;
    d.id = j["id"].get<std::string>();
    if (j.contains("add")) {
      for (const auto& o : j["add"]) {
        Org org;
        org.name = o.at("name").get<std::string>();
        org.kind = o.contains("kind") ? parse_org_kind(o["kind"].get<std::string>())
                                      : OrgKind::Unknown;
        d.add.push_back(std::move(org));
      }
    }
    if (j.contains("remove")) {
      for (const auto& n : j["remove"]) d.remove.push_back(n.get<std::string>());
    }
    out.push_back(std::move(d));
  }
  return out;
}

void apply_overrides(Corpus& corpus, const std::vector<OverrideDirective>& directives,
                     std::vector<std::string>* warnings) {
  auto warn = [&](std::string msg) {
    if (warnings) warnings->push_back(std::move(msg));
  };
  for (const auto& d : directives) {
    auto idx = corpus.index_of(d.id);
    if (!idx) {
      warn("override for unknown article id '" + d.id + "' skipped");
      continue;
    }
    Article& article = corpus.mutable_articles()[*idx];
    for (const auto& name : d.remove) {
      auto before = article.orgs.size();
      std::erase_if(article.orgs, [&](const Org& o) { return o.name == name; });
      if (article.orgs.size() == before) {
        warn("article " + d.id + ": org '" + name + "' not present, remove skipped");
      }
    }
    for (const auto& org : d.add) {
      auto it = std::find_if(article.orgs.begin(), article.orgs.end(),
                             [&](const Org& o) { return o.name == org.name; });
      if (it != article.orgs.end()) {
        if (it->kind != org.kind) {
          warn("article " + d.id + ": org '" + org.name + "' kind updated");
          it->kind = org.kind;
        }
      } else {
        article.orgs.push_back(org);
      }
    }
    sort_unique_orgs(article.orgs);
  }
}

std::string YearWindow::label() const {
  if (first == last) return std::to_string(first);
  return std::to_string(first) + "-" + std::to_string(last);
}

std::vector<ShareRow> participation_shares(const Corpus& corpus, Grouping grouping,
                                           const std::vector<YearWindow>& windows) {
  std::vector<ShareRow> rows;
  for (const auto& window : windows) {
    std::size_t denominator = 0;
    std::map<std::string, std::size_t> counts;  // group -> articles involving it
    for (const auto& article : corpus.articles()) {
      if (!window.contains(article.created) || !article.has_orgs()) continue;
      ++denominator;
      std::set<std::string> groups;
      for (const auto& org : article.orgs) {
        groups.insert(grouping == Grouping::ByKind ? std::string(org_kind_name(org.kind))
                                                   : org.name);
      }
      for (const auto& g : groups) ++counts[g];
    }
    if (denominator == 0) continue;  // empty window contributes no rows
    for (const auto& [group, n] : counts) {
      rows.push_back({group, window.label(),
                      static_cast<double>(n) / static_cast<double>(denominator), n});
    }
  }
  return rows;
}

void write_share_csv(const std::filesystem::path& path, const std::vector<ShareRow>& rows) {
  std::ostringstream out;
  out << "group,window,share,n_articles\n";
  for (const auto& r : rows) {
    out << util::csv_escape(r.group) << ',' << r.window << ','
        << util::format_double(r.share) << ',' << r.n_articles << '\n';
  }
  util::write_text(path, out.str());
}

std::string serialize_canonical(const Corpus& corpus) {
  std::ostringstream out;
  for (const auto& a : corpus.articles()) {
    ordered_json j;
    j["id"] = a.id;
    j["created"] = a.created.str();
    j["categories"] = a.categories;
    j["abstract"] = a.abstract_text;
    auto orgs = ordered_json::array();
    for (const auto& o : a.orgs) {
      ordered_json oj;
      oj["name"] = o.name;
      oj["kind"] = std::string(org_kind_name(o.kind));
      orgs.push_back(std::move(oj));
    }
    j["orgs"] = std::move(orgs);
    out << j.dump() << '\n';
  }
  return out.str();
}

void write_canonical_jsonl(const std::filesystem::path& path, const Corpus& corpus) {
  util::write_text(path, serialize_canonical(corpus));
}

std::pair<int, int> year_range(const Corpus& corpus) {
  if (corpus.empty()) throw DataError("cannot compute year range of an empty corpus");
  int lo = corpus.articles().front().created.year;
  int hi = lo;
  for (const auto& a : corpus.articles()) {
    lo = std::min(lo, a.created.year);
    hi = std::max(hi, a.created.year);
  }
  return {lo, hi};
}

}  // namespace divscope::corpus
