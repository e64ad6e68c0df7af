#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "kontext/model.hpp"

namespace kontext {

struct Corpus
{
  std::vector<std::string>      alphabet;
  std::vector<std::vector<int>> sequences;
};

enum class CorpusFormat
{
  Plain,  // one sequence per line
  Fasta,  // ">" header lines start records, other lines are concatenated
  Csv,    // one sequence per row in a chosen column
};

struct CorpusOptions
{
  CorpusFormat format = CorpusFormat::Plain;
  /// Fixed token order. Without it tokens are numbered in first-seen order.
  std::optional<std::vector<std::string>> alphabet;
  /// Column index for csv; negative counts from the end.
  int  csv_column = -1;
  bool csv_header = false;
  /// Upper-cases every token (and the supplied alphabet).
  bool fold_case = true;
};

/// Each non-whitespace character is a token. Throws ParseError (with the
/// 1-based line) on malformed input and UnknownToken for a character outside
/// a supplied alphabet.
Corpus parse_corpus(std::string const &text, CorpusOptions const &options = {});
Corpus load_corpus(std::filesystem::path const &path, CorpusOptions const &options = {});

struct WindowedModelSpec
{
  int n         = 4;
  int stride    = 1;
  int min_count = 2;
};

struct WindowedModel
{
  EmpiricalModel             model;
  /// Occurrences of each kept context, in context order.
  std::vector<std::uint64_t> counts;
  std::uint64_t              windows_scanned = 0;
  /// Windows whose prefix fell below min_count.
  std::uint64_t              windows_dropped = 0;
};

/// Contexts are the distinct n-token prefixes (as labels) over n
/// position-slot observables; each distribution is the empirical frequency
/// of the following n tokens. Sequences shorter than 2n are skipped. Throws
/// EmptyModel when no prefix reaches min_count.
WindowedModel windowed_model(Corpus const &corpus, WindowedModelSpec const &spec);

/// Appends seeded i.i.d. uniform tokens to every sequence shorter than
/// target_len. Longer sequences are left as they are.
Corpus pad_sequences(Corpus const &corpus, int target_len, std::uint64_t seed);

/// Adds `extra` observables to every context, each uniformly distributed
/// and independent of the rest.
EmpiricalModel pad_model(EmpiricalModel const &model, int extra);

}  // namespace kontext
