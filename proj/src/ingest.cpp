#include "kontext/ingest.hpp"

#include <algorithm>
#include <cctype>
#include <map>
#include <sstream>
#include <unordered_map>

#include "kontext/error.hpp"
#include "kontext/model_io.hpp"
#include "kontext/rng.hpp"

namespace kontext {

namespace {

std::string trim(std::string const &s)
{
  auto const first = s.find_first_not_of(" \t\r\n");
  if (first == std::string::npos)
  {
    return {};
  }
  auto const last = s.find_last_not_of(" \t\r\n");
  return s.substr(first, last - first + 1);
}

class Tokenizer
{
public:
  explicit Tokenizer(CorpusOptions const &options) : options_(options)
  {
    if (options.alphabet)
    {
      for (auto token : *options.alphabet)
      {
        token = fold(token);
        if (index_.count(token) != 0)
        {
          throw InvalidModel("duplicate alphabet token '" + token + "'");
        }
        index_.emplace(token, static_cast<int>(alphabet_.size()));
        alphabet_.push_back(token);
      }
    }
  }

  void append(std::string const &text, std::size_t line, std::vector<int> &out)
  {
    for (char ch : text)
    {
      if (std::isspace(static_cast<unsigned char>(ch)))
      {
        continue;
      }
      std::string const token = fold(std::string(1, ch));
      auto              it    = index_.find(token);
      if (it == index_.end())
      {
        if (options_.alphabet)
        {
          throw UnknownToken("token '" + token + "' is not in the alphabet", line);
        }
        it = index_.emplace(token, static_cast<int>(alphabet_.size())).first;
        alphabet_.push_back(token);
      }
      out.push_back(it->second);
    }
  }

  std::vector<std::string> take_alphabet() { return std::move(alphabet_); }

private:
  std::string fold(std::string s) const
  {
    if (options_.fold_case)
    {
      for (char &ch : s)
      {
        ch = static_cast<char>(std::toupper(static_cast<unsigned char>(ch)));
      }
    }
    return s;
  }

  CorpusOptions const                 &options_;
  std::vector<std::string>             alphabet_;
  std::unordered_map<std::string, int> index_;
};

std::vector<std::string> split_csv(std::string const &line)
{
  std::vector<std::string> cells;
  std::string              cell;
  for (char ch : line)
  {
    if (ch == ',')
    {
      cells.push_back(trim(cell));
      cell.clear();
    }
    else
    {
      cell += ch;
    }
  }
  cells.push_back(trim(cell));
  return cells;
}

}  // namespace

Corpus parse_corpus(std::string const &text, CorpusOptions const &options)
{
  Tokenizer          tokens(options);
  Corpus             corpus;
  std::istringstream in(text);
  std::string        raw;
  std::size_t        line = 0;

  std::vector<int> record;
  std::size_t      record_line = 0;
  bool             in_record   = false;
  auto             close_record = [&] {
    if (in_record)
    {
      if (record.empty())
      {
        throw ParseError("record has no sequence", record_line);
      }
      corpus.sequences.push_back(std::move(record));
      record.clear();
    }
    in_record = false;
  };

  while (std::getline(in, raw))
  {
    ++line;
    std::string const content = trim(raw);
    switch (options.format)
    {
    case CorpusFormat::Plain:
      if (!content.empty())
      {
        std::vector<int> seq;
        tokens.append(content, line, seq);
        corpus.sequences.push_back(std::move(seq));
      }
      break;
    case CorpusFormat::Fasta:
      if (!content.empty() && content.front() == '>')
      {
        close_record();
        in_record   = true;
        record_line = line;
      }
      else if (!content.empty())
      {
        if (!in_record)
        {
          in_record   = true;
          record_line = line;
        }
        tokens.append(content, line, record);
      }
      break;
    case CorpusFormat::Csv:
    {
      if (content.empty() || (options.csv_header && line == 1))
      {
        break;
      }
      auto const cells  = split_csv(content);
      int const  column = options.csv_column < 0 ? static_cast<int>(cells.size()) + options.csv_column
                                                 : options.csv_column;
      if (column < 0 || column >= static_cast<int>(cells.size()))
      {
        throw ParseError("row has " + std::to_string(cells.size()) + " columns, column " +
                           std::to_string(options.csv_column) + " requested",
                         line);
      }
      std::vector<int> seq;
      tokens.append(cells[static_cast<std::size_t>(column)], line, seq);
      if (seq.empty())
      {
        throw ParseError("empty sequence cell", line);
      }
      corpus.sequences.push_back(std::move(seq));
      break;
    }
    }
  }
  close_record();
  corpus.alphabet = tokens.take_alphabet();
  return corpus;
}

Corpus load_corpus(std::filesystem::path const &path, CorpusOptions const &options)
{
  return parse_corpus(read_file(path), options);
}

WindowedModel windowed_model(Corpus const &corpus, WindowedModelSpec const &spec)
{
  if (spec.n < 1 || spec.stride < 1 || spec.min_count < 1)
  {
    throw InvalidModel("window length, stride and min_count must be positive");
  }
  if (corpus.alphabet.empty())
  {
    throw EmptyModel("corpus has no tokens");
  }
  auto const n = static_cast<std::size_t>(spec.n);

  // prefix -> (continuation -> count)
  std::map<std::vector<int>, std::map<std::vector<int>, std::uint64_t>> table;
  std::uint64_t                                                         scanned = 0;
  for (auto const &seq : corpus.sequences)
  {
    for (std::size_t start = 0; start + 2 * n <= seq.size(); start += static_cast<std::size_t>(spec.stride))
    {
      std::vector<int> prefix(seq.begin() + static_cast<std::ptrdiff_t>(start),
                              seq.begin() + static_cast<std::ptrdiff_t>(start + n));
      std::vector<int> next(seq.begin() + static_cast<std::ptrdiff_t>(start + n),
                            seq.begin() + static_cast<std::ptrdiff_t>(start + 2 * n));
      ++table[std::move(prefix)][std::move(next)];
      ++scanned;
    }
  }

  std::vector<ObservableId> slots(n);
  for (std::size_t i = 0; i < n; ++i)
  {
    slots[i] = static_cast<ObservableId>(i);
  }
  std::vector<Context>             contexts;
  std::vector<ContextDistribution> dists;
  std::vector<std::uint64_t>       counts;
  std::uint64_t                    dropped = 0;
  for (auto const &[prefix, continuations] : table)
  {
    std::uint64_t total = 0;
    for (auto const &[next, count] : continuations)
    {
      total += count;
    }
    if (total < static_cast<std::uint64_t>(spec.min_count))
    {
      dropped += total;
      continue;
    }
    ContextDistribution dist;
    for (auto const &[next, count] : continuations)
    {
      dist.entries.push_back({next, static_cast<double>(count) / static_cast<double>(total)});
    }
    contexts.push_back({static_cast<int>(contexts.size()), slots, prefix, {}});
    dists.push_back(std::move(dist));
    counts.push_back(total);
  }
  if (contexts.empty())
  {
    throw EmptyModel("no " + std::to_string(spec.n) + "-token prefix occurs at least " +
                     std::to_string(spec.min_count) + " times");
  }
  return {EmpiricalModel(spec.n, static_cast<int>(corpus.alphabet.size()), std::move(contexts), std::move(dists)),
          std::move(counts), scanned, dropped};
}

Corpus pad_sequences(Corpus const &corpus, int target_len, std::uint64_t seed)
{
  Corpus padded = corpus;
  if (padded.alphabet.empty())
  {
    return padded;
  }
  Rng rng(seed);
  for (auto &seq : padded.sequences)
  {
    while (static_cast<int>(seq.size()) < target_len)
    {
      seq.push_back(static_cast<int>(rng.below(padded.alphabet.size())));
    }
  }
  return padded;
}

EmpiricalModel pad_model(EmpiricalModel const &model, int extra)
{
  if (extra < 0)
  {
    throw InvalidModel("padding must be nonnegative");
  }
  int const     base_obs = model.num_observables();
  int const     alphabet = model.num_outcomes();
  std::uint64_t tails    = 1;
  for (int i = 0; i < extra; ++i)
  {
    tails *= static_cast<std::uint64_t>(alphabet);
  }

  std::vector<Context>             contexts;
  std::vector<ContextDistribution> dists;
  for (std::size_t c = 0; c < model.num_contexts(); ++c)
  {
    Context ctx = model.context(c);
    for (int j = 0; j < extra; ++j)
    {
      ctx.observables.push_back(base_obs + j);
    }
    ContextDistribution dist;
    for (auto const &entry : model.distribution(c).entries)
    {
      for (std::uint64_t tail = 0; tail < tails; ++tail)
      {
        Outcome       tuple = entry.outcome;
        std::uint64_t code  = tail;
        Outcome       suffix(static_cast<std::size_t>(extra));
        for (int j = extra - 1; j >= 0; --j)
        {
          suffix[static_cast<std::size_t>(j)] = static_cast<OutcomeId>(code % static_cast<std::uint64_t>(alphabet));
          code /= static_cast<std::uint64_t>(alphabet);
        }
        tuple.insert(tuple.end(), suffix.begin(), suffix.end());
        dist.entries.push_back({std::move(tuple), entry.p / static_cast<double>(tails)});
      }
    }
    if (!ctx.inputs.empty())
    {
      // Padded positions carry no setting of their own.
      ctx.inputs.resize(ctx.observables.size(), 0);
    }
    contexts.push_back(std::move(ctx));
    dists.push_back(std::move(dist));
  }
  return EmpiricalModel(base_obs + extra, alphabet, std::move(contexts), std::move(dists), model.consistency_enforced());
}

}  // namespace kontext
