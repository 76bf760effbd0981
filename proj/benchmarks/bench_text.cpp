#include <benchmark/benchmark.h>

#include <random>
#include <sstream>

#include "divscope/textproc.hpp"

namespace {

using namespace divscope;

const text::StopwordSet kStop = {"the", "of", "and", "a", "is", "in", "to", "for"};

std::vector<std::string> sample_docs(std::size_t n_docs, std::uint64_t seed) {
  std::mt19937_64 eng(seed);
  const char* words[] = {"graph",  "neural", "network", "learning", "random", "walk",
                         "matrix", "sparse", "deep",    "model",    "the",    "of",
                         "policy", "agent",  "reward",  "gradient", "descent"};
  std::vector<std::string> docs;
  for (std::size_t d = 0; d < n_docs; ++d) {
    std::ostringstream doc;
    for (int w = 0; w < 60; ++w) {
      doc << words[eng() % std::size(words)] << ' ';
    }
    docs.push_back(doc.str());
  }
  return docs;
}

void BM_Tokenize(benchmark::State& state) {
  auto docs = sample_docs(1, 5);
  for (auto _ : state) {
    benchmark::DoNotOptimize(text::tokenize(docs[0], kStop));
  }
}
BENCHMARK(BM_Tokenize);

void BM_CollocationDetection(benchmark::State& state) {
  auto docs = sample_docs(static_cast<std::size_t>(state.range(0)), 6);
  std::vector<std::vector<std::string>> tokenized;
  for (const auto& d : docs) tokenized.push_back(text::tokenize(d, kStop));
  for (auto _ : state) {
    benchmark::DoNotOptimize(text::detect_collocations(tokenized, {10, 3.0}));
  }
}
BENCHMARK(BM_CollocationDetection)->Arg(1000)->Arg(10000);

void BM_TermTable(benchmark::State& state) {
  auto docs = sample_docs(static_cast<std::size_t>(state.range(0)), 7);
  std::vector<text::TokenStream> streams;
  for (std::size_t i = 0; i < docs.size(); ++i) {
    streams.push_back({"d" + std::to_string(i), text::tokenize(docs[i], kStop)});
  }
  for (auto _ : state) {
    benchmark::DoNotOptimize(text::build_term_table(streams, "bench"));
  }
}
BENCHMARK(BM_TermTable)->Arg(10000);

}  // namespace
