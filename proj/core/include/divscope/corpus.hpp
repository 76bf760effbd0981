#pragma once

#include <compare>
#include <cstddef>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace divscope::corpus {

enum class OrgKind {
  Company,
  Education,
  Facility,
  Government,
  Nonprofit,
  Healthcare,
  Other,
  Unknown,
};

OrgKind parse_org_kind(std::string_view s);
std::string_view org_kind_name(OrgKind kind);

struct Date {
  int year = 0;
  int month = 0;
  int day = 0;

  static std::optional<Date> parse(std::string_view iso);
  std::string str() const;
  auto operator<=>(const Date&) const = default;
};

struct Org {
  std::string name;
  OrgKind kind = OrgKind::Unknown;
  auto operator<=>(const Org&) const = default;
};

struct Article {
  std::string id;
  Date created;
  std::vector<std::string> categories;  // sorted, unique
  std::string abstract_text;
  std::vector<Org> orgs;  // sorted, unique

  bool has_abstract() const { return !abstract_text.empty(); }
  bool has_orgs() const { return !orgs.empty(); }
  bool involves_kind(OrgKind kind) const;
  bool has_category(std::string_view cat) const;
  // Archive prefix match: "cs" covers "cs.AI", "cs.LG", ...
  bool in_archive(std::string_view archive) const;
};

struct LoadReport {
  std::vector<std::string> rejected;  // one diagnostic per dropped record
  std::vector<std::string> warnings;
  std::size_t empty_abstracts = 0;
  std::size_t loaded = 0;
};

// Articles held in ascending id order; all downstream iteration follows that
// order so outputs are independent of input ordering and parallelism.
class Corpus {
 public:
  Corpus() = default;
  static Corpus from_articles(std::vector<Article> articles);

  const std::vector<Article>& articles() const { return articles_; }
  std::vector<Article>& mutable_articles() { return articles_; }

  const Article* find(std::string_view id) const;
  std::optional<std::size_t> index_of(std::string_view id) const;
  std::size_t size() const { return articles_.size(); }
  bool empty() const { return articles_.empty(); }

  void reindex();

 private:
  std::vector<Article> articles_;
  std::unordered_map<std::string, std::size_t> index_;
};

enum class ArticleFormat { JsonLines };

// JSON-lines input, one article per line with fields id, created, categories,
// abstract, orgs. Records with missing/invalid dates are rejected into the
// report; a duplicate id is a hard error naming the id.
Corpus load_articles(const std::filesystem::path& path, LoadReport* report = nullptr,
                     unsigned threads = 1, ArticleFormat format = ArticleFormat::JsonLines);

// A named sub-corpus: a predicate description plus the matching article ids.
struct CorpusSlice {
  std::string description;
  std::vector<std::string> ids;  // sorted, unique, all members of the corpus

  // Validates membership; unknown ids are an error naming the first one.
  static CorpusSlice from_ids(const Corpus& corpus, std::string description,
                              std::vector<std::string> ids);
  // Collects the articles satisfying the predicate.
  static CorpusSlice filter(const Corpus& corpus, std::string description,
                            const std::function<bool(const Article&)>& predicate);
  std::size_t size() const { return ids.size(); }
};

// Truncates an organisation name at the first "(" and trims whitespace.
std::string dedup_org_name(std::string_view raw);
// Normalizes every org name and collapses duplicate (article, org) pairs.
void dedup_org_names(Corpus& corpus);

struct OverrideDirective {
  std::string id;
  std::vector<Org> add;
  std::vector<std::string> remove;
};

std::vector<OverrideDirective> load_overrides(const std::filesystem::path& path);
void apply_overrides(Corpus& corpus, const std::vector<OverrideDirective>& directives,
                     std::vector<std::string>* warnings = nullptr);

enum class Grouping { ByKind, ByName };

struct YearWindow {
  int first = 0;
  int last = 0;  // inclusive

  bool contains(const Date& d) const { return d.year >= first && d.year <= last; }
  std::string label() const;
};

struct ShareRow {
  std::string group;
  std::string window;
  double share = 0.0;
  std::size_t n_articles = 0;  // articles involving the group in the window
};

// Share of articles involving at least one org of the group among articles
// involving any org, per window. An article counts once per group.
std::vector<ShareRow> participation_shares(const Corpus& corpus, Grouping grouping,
                                           const std::vector<YearWindow>& windows);

void write_share_csv(const std::filesystem::path& path, const std::vector<ShareRow>& rows);

// Canonical byte serialization in id order; equal corpora serialize equally.
std::string serialize_canonical(const Corpus& corpus);
void write_canonical_jsonl(const std::filesystem::path& path, const Corpus& corpus);

// Year span covered by the corpus (min/max of created dates).
std::pair<int, int> year_range(const Corpus& corpus);

}  // namespace divscope::corpus
