#include <gtest/gtest.h>

#include <map>

#include "kontext/contextuality.hpp"
#include "kontext/error.hpp"
#include "kontext/generators.hpp"
#include "kontext/ingest.hpp"

using namespace kontext;

TEST(Parse, PlainFastaCsv)
{
  auto const plain = parse_corpus("acgt\n\nAC GA\n");
  EXPECT_EQ(plain.alphabet, (std::vector<std::string>{"A", "C", "G", "T"}));
  EXPECT_EQ(plain.sequences, (std::vector<std::vector<int>>{{0, 1, 2, 3}, {0, 1, 2, 0}}));

  CorpusOptions fasta;
  fasta.format   = CorpusFormat::Fasta;
  auto const fa  = parse_corpus(">one\nAC\nGT\n>two\nTT\n", fasta);
  EXPECT_EQ(fa.sequences, (std::vector<std::vector<int>>{{0, 1, 2, 3}, {3, 3}}));

  CorpusOptions csv;
  csv.format     = CorpusFormat::Csv;
  csv.csv_header = true;
  auto const cs  = parse_corpus("id,class,seq\n1,x,GATT\n2,y, CAT \n", csv);
  EXPECT_EQ(cs.alphabet, (std::vector<std::string>{"G", "A", "T", "C"}));
  EXPECT_EQ(cs.sequences.size(), 2u);
  EXPECT_EQ(cs.sequences[1], (std::vector<int>{3, 1, 2}));

  CorpusOptions fixed;
  fixed.alphabet = std::vector<std::string>{"t", "g", "c", "a"};
  EXPECT_EQ(parse_corpus("ACGT\n", fixed).sequences[0], (std::vector<int>{3, 2, 1, 0}));

  CorpusOptions keep;
  keep.fold_case = false;
  EXPECT_EQ(parse_corpus("aA\n", keep).alphabet.size(), 2u);
}

TEST(Parse, ErrorsCarryLineNumbers)
{
  CorpusOptions fixed;
  fixed.alphabet = std::vector<std::string>{"A", "C"};
  try
  {
    parse_corpus("AC\nCA\nAX\n", fixed);
    FAIL() << "expected UnknownToken";
  }
  catch (UnknownToken const &e)
  {
    EXPECT_EQ(e.line(), 3u);
  }

  CorpusOptions fasta;
  fasta.format = CorpusFormat::Fasta;
  try
  {
    parse_corpus(">a\nAC\n>b\n>c\nA\n", fasta);
    FAIL() << "expected ParseError";
  }
  catch (ParseError const &e)
  {
    EXPECT_EQ(e.line(), 3u);
  }

  CorpusOptions csv;
  csv.format     = CorpusFormat::Csv;
  csv.csv_column = 2;
  EXPECT_THROW(parse_corpus("a,b,ACG\nx,y\n", csv), ParseError);
  EXPECT_THROW(load_corpus("/nonexistent/corpus.txt"), Error);
}

TEST(Windows, CountsAndDistributions)
{
  // prefixes of length 2 followed by 2 tokens, stride 1
  auto const corpus = parse_corpus("ABABAB\nABAA\n");
  auto const w      = windowed_model(corpus, {2, 1, 1});
  // windows: seq1 starts 0,1,2 ; seq2 start 0
  EXPECT_EQ(w.windows_scanned, 4u);
  EXPECT_EQ(w.windows_dropped, 0u);
  std::uint64_t total = 0;
  for (auto c : w.counts)
  {
    total += c;
  }
  EXPECT_EQ(total + w.windows_dropped, w.windows_scanned);
  ASSERT_EQ(w.model.num_contexts(), 2u);
  // prefix AB: followed by AB, AB, AA
  auto const ab = w.model.context(0);
  EXPECT_EQ(ab.label, (std::vector<int>{0, 1}));
  EXPECT_EQ(ab.observables, (std::vector<int>{0, 1}));
  EXPECT_NEAR(w.model.probability(0, std::vector<int>{0, 1}), 2.0 / 3.0, 1e-12);
  EXPECT_NEAR(w.model.probability(0, std::vector<int>{0, 0}), 1.0 / 3.0, 1e-12);
  EXPECT_EQ(w.counts[0], 3u);

  auto const strict = windowed_model(corpus, {2, 1, 2});
  EXPECT_EQ(strict.model.num_contexts(), 1u);
  EXPECT_EQ(strict.windows_dropped, 1u);
  EXPECT_THROW(windowed_model(corpus, {2, 1, 10}), EmptyModel);
  EXPECT_THROW(windowed_model(corpus, {0, 1, 1}), InvalidModel);
  EXPECT_EQ(windowed_model(corpus, {2, 2, 1}).windows_scanned, 3u);
}

TEST(Padding, SequencesReachTargetLength)
{
  auto const corpus = parse_corpus("AC\nACGTACGT\n");
  auto const padded = pad_sequences(corpus, 6, 3);
  EXPECT_EQ(padded.sequences[0].size(), 6u);
  EXPECT_EQ(padded.sequences[1].size(), 8u);
  EXPECT_EQ(padded.sequences[0][0], 0);
  EXPECT_EQ(padded.sequences[0][1], 1);
  EXPECT_EQ(padded.sequences, pad_sequences(corpus, 6, 3).sequences);
}

// Extra independent uniform observables never change the contextuality number.
TEST(Padding, ContextualityNumberIsInvariant)
{
  for (std::uint64_t seed = 0; seed < 25; ++seed)
  {
    RandomModelSpec spec;
    spec.n        = 3 + static_cast<int>(seed % 2);
    spec.sparsity = 1 + static_cast<int>(seed % 2);
    spec.seed     = seed;
    auto const m  = random_model(spec);
    int const  k  = contextuality_number_definitional(m);
    auto const p  = pad_model(m, 1 + static_cast<int>(seed % 2));
    EXPECT_EQ(p.num_observables(), m.num_observables() + 1 + static_cast<int>(seed % 2));
    EXPECT_EQ(contextuality_number_definitional(p), k);
  }
  auto const g = pad_model(ghz_model(3), 1);
  EXPECT_EQ(contextuality_number_definitional(g), 1);
  EXPECT_EQ(g.context(3).inputs.size(), 4u);
}
