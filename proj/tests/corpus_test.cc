/*
 * Copyright 2026 The ccshap Authors.
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include <gtest/gtest.h>

#include <set>

#include "ccshap/corpus.h"
#include "ccshap/error.h"
#include "ccshap/hashing.h"
#include "ccshap/text_util.h"
#include "test_util.h"

namespace ccshap::corpus {
namespace {

using ccshap::testing::DataDir;
using ccshap::testing::TempDir;

CleanEmail Make(const std::string& sender, const std::string& subject, const std::string& body,
                Label label) {
  return {sender, subject, body, label, ContentHash(sender, subject, body)};
}

Corpus MakeCorpus(size_t phishing, size_t ham) {
  std::vector<CleanEmail> records;
  for (size_t i = 0; i < std::max(phishing, ham); ++i) {
    if (i < phishing) records.push_back(Make("p", "s", "phish " + std::to_string(i), Label::kPhishing));
    if (i < ham) records.push_back(Make("h", "s", "ham " + std::to_string(i), Label::kLegitimate));
  }
  return Corpus(records);
}

TEST(CleanText, StripsTagsAndEntities) {
  EXPECT_EQ(CleanText("<p>Hello&nbsp;World</p>"), "Hello World");
}

TEST(CleanText, CollapsesWhitespace) { EXPECT_EQ(CleanText("Pay   now\r\n\r\n!!"), "Pay now !!"); }

TEST(CleanText, ToleratesBrokenMarkup) {
  EXPECT_EQ(CleanText("a < b and <b>bold"), "a < b and bold");
  EXPECT_EQ(CleanText("<div class=\"x\"unclosed text"), "<div class=\"x\"unclosed text");
  EXPECT_EQ(CleanText("<script>var x = 1;</script>visible<!-- hidden -->"), "visible");
  EXPECT_EQ(CleanText("&copy; &#169; &#x41; &euro;"), "\xC2\xA9 \xC2\xA9 A \xE2\x82\xAC");
}

TEST(CleanText, DropsControlsAndEscapes) {
  EXPECT_EQ(CleanText("line1\\nline2\x01\x07 end"), "line1 line2 end");
  EXPECT_EQ(CleanText("zero\xE2\x80\x8Bwidth"), "zerowidth");
  EXPECT_EQ(CleanText("wow!!!!!! ok...."), "wow! ok.");
  EXPECT_EQ(CleanText(""), "");
}

TEST(CleanText, IdempotentOnRandomFixtures) {
  const std::vector<std::string> pieces = {
      "<p>", "</p>", "<br/>", "&nbsp;", "&amp;", "&lt;", "&gt;b", "&#65;", "&#x263A;", "\\n",
      "\\t", "\r\n", "\t", "  ", "<", ">", "&", ";", "!!!", "...", "<!--", "-->", "<script>",
      "</script>", "Hello", "world", "verify", "caf\xC3\xA9", "\x01", "\x7f", "\xC2\xA0", "\xff",
      "<a href='x'>", "</a>", "&amp;nbsp;", "&lt;b&gt;", "&&", "<<b>>", "\\\\n", "==="};
  Rng rng(1234);
  for (int fixture = 0; fixture < 100; ++fixture) {
    std::string raw;
    const size_t parts = 1 + rng.Below(30);
    for (size_t i = 0; i < parts; ++i) raw += pieces[rng.Below(pieces.size())];
    const std::string once = CleanText(raw);
    EXPECT_EQ(CleanText(once), once) << "fixture " << fixture << ": " << raw;
    EXPECT_EQ(once, std::string(TrimWhitespace(once)));
    EXPECT_EQ(once.find("  "), std::string::npos);
  }
}

TEST(LoadCorpus, JsonlRows) {
  const LoadResult r = LoadCorpus(DataDir() / "rows.jsonl", Format::kJsonl);
  ASSERT_EQ(r.emails.size(), 3u);
  EXPECT_TRUE(r.skipped.empty());
  EXPECT_EQ(r.emails[0].origin, Origin::kPhishingSource);
  EXPECT_EQ(r.emails[1].origin, Origin::kHamSource);
  EXPECT_EQ(r.emails[2].origin, Origin::kHamSource);
  EXPECT_EQ(r.emails[0].Header("subject").value_or(""), "Verify now");
}

TEST(LoadCorpus, MboxWithOneMalformedMessage) {
  const LoadResult r = LoadCorpus(DataDir() / "phishing.mbox", Format::kMbox, Origin::kPhishingSource);
  EXPECT_EQ(r.emails.size(), 4u);
  ASSERT_EQ(r.skipped.size(), 1u);
  EXPECT_EQ(r.skipped[0].reason, "no header block");
  std::set<std::string> ids;
  for (const auto& e : r.emails) ids.insert(e.source_id);
  ids.insert(r.skipped[0].source_id);
  EXPECT_EQ(ids.size(), 5u);
}

TEST(LoadCorpus, MimeDecoding) {
  const LoadResult r = LoadCorpus(DataDir() / "phishing.mbox", Format::kMbox, Origin::kPhishingSource);
  ASSERT_EQ(r.emails.size(), 4u);
  // multipart/alternative: the text/plain part wins, soft breaks joined.
  EXPECT_NE(r.emails[2].body_raw.find("winner of our annual draw"), std::string::npos);
  EXPECT_EQ(r.emails[2].body_raw.find("<p>"), std::string::npos);
  // RFC 2047 subject and base64 body.
  EXPECT_EQ(r.emails[3].Header("Subject").value_or(""), "Password expiry notice");
  EXPECT_NE(r.emails[3].body_raw.find("Your mailbox password will expire today"), std::string::npos);
  // mboxrd unescaping in the ham file.
  const LoadResult ham = LoadCorpus(DataDir() / "ham.mbox", Format::kMbox, Origin::kHamSource);
  ASSERT_EQ(ham.emails.size(), 4u);
  EXPECT_NE(ham.emails[3].body_raw.find("\nFrom next month"), std::string::npos);
}

TEST(LoadCorpus, EmptyFileIsEmptyList) {
  const LoadResult r = LoadCorpus(DataDir() / "empty.mbox", Format::kMbox);
  EXPECT_TRUE(r.emails.empty());
  EXPECT_TRUE(r.skipped.empty());
}

TEST(LoadCorpus, EmlDirectoryAndCsv) {
  const LoadResult eml = LoadCorpus(DataDir() / "eml", Format::kEmlDir, Origin::kPhishingSource);
  ASSERT_EQ(eml.emails.size(), 2u);
  EXPECT_LT(eml.emails[0].source_id, eml.emails[1].source_id);
  const LoadResult csv = LoadCorpus(DataDir() / "rows.csv", Format::kCsv);
  ASSERT_EQ(csv.emails.size(), 2u);
  EXPECT_EQ(csv.emails[0].Header("Subject").value_or(""), "Hello, friend");
  EXPECT_EQ(csv.emails[1].origin, Origin::kHamSource);
}

TEST(LoadCorpus, MissingPathNamesTheFile) {
  try {
    LoadCorpus(DataDir() / "does-not-exist.mbox", Format::kMbox);
    FAIL() << "expected an ingestion error";
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kIngestion);
    EXPECT_NE(std::string(e.what()).find("does-not-exist.mbox"), std::string::npos);
  }
}

TEST(CleanAll, ParallelMatchesSequential) {
  const LoadResult a = LoadCorpus(DataDir() / "phishing.mbox", Format::kMbox, Origin::kPhishingSource);
  const LoadResult b = LoadCorpus(DataDir() / "ham.mbox", Format::kMbox, Origin::kHamSource);
  std::vector<RawEmail> raw = a.emails;
  raw.insert(raw.end(), b.emails.begin(), b.emails.end());
  const CleanResult seq = CleanAll(raw, {}, 1);
  const CleanResult par = CleanAll(raw, {}, 4);
  EXPECT_EQ(seq.emails, par.emails);
  EXPECT_EQ(seq.skipped, par.skipped);
  ASSERT_EQ(seq.emails.size(), 8u);
  for (const auto& e : seq.emails) {
    EXPECT_EQ(e.body.find('<'), std::string::npos) << e.body;
    for (char c : e.body) EXPECT_FALSE(static_cast<unsigned char>(c) < 0x20 && c != '\n');
  }
  EXPECT_EQ(seq.emails[0].sender, "PayPal Security (security@paypa1-verify.com)");
}

TEST(CleanAll, UnlabeledAndNonEnglishAreSkipped) {
  RawEmail unlabeled{"u#1", {{"Subject", "hi"}}, "the body is here", Origin::kUnlabeled};
  RawEmail foreign{"f#1", {{"Subject", "Hallo"}}, "Sehr geehrte Kundin bitte bestaetigen Sie Ihr Konto",
                   Origin::kPhishingSource};
  const CleanResult r = CleanAll({unlabeled, foreign});
  EXPECT_TRUE(r.emails.empty());
  ASSERT_EQ(r.skipped.size(), 2u);
  EXPECT_EQ(r.skipped[0].reason, "unlabeled record");
  EXPECT_NE(r.skipped[1].reason.find("non-English"), std::string::npos);
}

TEST(ContentHash, NormalizesCaseAndWhitespace) {
  EXPECT_EQ(ContentHash("A", "Hello  World", "Body"), ContentHash("a", "hello world", " body "));
  EXPECT_NE(ContentHash("a", "b", "c"), ContentHash("a", "bc", ""));
}

TEST(Deduplicate, Examples) {
  const CleanEmail a = Make("s", "x", "a", Label::kPhishing);
  const CleanEmail b = Make("s", "x", "b", Label::kPhishing);
  EXPECT_EQ(Deduplicate({a, a, b}), (std::vector<CleanEmail>{a, b}));
  EXPECT_EQ(Deduplicate({a, b}), (std::vector<CleanEmail>{a, b}));
  EXPECT_EQ(Deduplicate(Deduplicate({b, a, b})), Deduplicate({b, a, b}));
}

TEST(Deduplicate, PlantedDuplicates) {
  std::vector<CleanEmail> records;
  for (int i = 0; i < 2400; ++i) {
    records.push_back(Make("s", "x", "body number " + std::to_string(i), Label::kPhishing));
  }
  const std::vector<CleanEmail> originals = records;
  Rng rng(5);
  for (int i = 0; i < 100; ++i) {
    CleanEmail dup = originals[rng.Below(originals.size())];
    dup.body = "  BODY number " + dup.body.substr(12) + " ";  // same normalized content
    dup.content_hash = ContentHash(dup.sender, dup.subject, dup.body);
    records.insert(records.begin() + static_cast<std::ptrdiff_t>(rng.Below(records.size())), dup);
  }
  ASSERT_EQ(records.size(), 2500u);
  EXPECT_EQ(Deduplicate(records).size(), 2400u);
}

TEST(Balance, Examples) {
  const Corpus two = MakeCorpus(2, 2);
  const Corpus one = Balance(two, 1, 3);
  EXPECT_EQ(one.count(Label::kPhishing), 1u);
  EXPECT_EQ(one.count(Label::kLegitimate), 1u);
  EXPECT_EQ(Balance(two, 1, 3).records(), one.records());
  try {
    Balance(MakeCorpus(2, 5), 3, 0);
    FAIL() << "expected a data error";
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kData);
    EXPECT_NE(std::string(e.what()).find("phishing=2"), std::string::npos) << e.what();
  }
}

TEST(Balance, ThousandsPerClass) {
  const Corpus big = MakeCorpus(3000, 2600);
  const Corpus balanced = Balance(big, 2500, 11);
  EXPECT_EQ(balanced.count(Label::kPhishing), 2500u);
  EXPECT_EQ(balanced.count(Label::kLegitimate), 2500u);
}

TEST(Split, StratifiedDisjointAndDeterministic) {
  const Corpus c = MakeCorpus(100, 100);
  const Split s = SplitCorpus(c, 0.8, 9);
  EXPECT_EQ(s.train.count(Label::kPhishing), 80u);
  EXPECT_EQ(s.train.count(Label::kLegitimate), 80u);
  EXPECT_EQ(s.validation.count(Label::kPhishing), 20u);
  std::multiset<uint64_t> all;
  for (const auto& e : c.records()) all.insert(e.content_hash);
  std::multiset<uint64_t> joined;
  for (const auto& e : s.train.records()) joined.insert(e.content_hash);
  for (const auto& e : s.validation.records()) joined.insert(e.content_hash);
  EXPECT_EQ(all, joined);
  EXPECT_EQ(SplitCorpus(c, 0.8, 9).train.records(), s.train.records());
}

TEST(Split, DifferentSeedsDiffer) {
  const Corpus c = MakeCorpus(10, 10);
  const auto base = SplitCorpus(c, 0.5, 0).train.records();
  for (uint64_t seed = 1; seed <= 20; ++seed) {
    EXPECT_NE(SplitCorpus(c, 0.5, seed).train.records(), base) << "seed " << seed;
  }
}

TEST(Split, RejectsBadFraction) {
  for (double f : {0.0, 1.0, -0.5, 1.5}) {
    try {
      SplitCorpus(MakeCorpus(3, 3), f, 0);
      FAIL();
    } catch (const Error& e) {
      EXPECT_EQ(e.kind(), ErrorKind::kConfig);
    }
  }
}

TEST(Render, FillsTemplate) {
  const CleanEmail e = Make("bob", "Hi", "Body text.", Label::kLegitimate);
  EXPECT_EQ(RenderInput(e, kDefaultTemplate), "From: bob\nSubject: Hi\nBody text.");
  const CleanEmail empty = Make("bob", "Hi", "", Label::kLegitimate);
  EXPECT_EQ(RenderInput(empty, kDefaultTemplate), "From: bob\nSubject: Hi\n");
  try {
    RenderInput(e, "{sender} {subject}");
    FAIL();
  } catch (const Error& err) {
    EXPECT_EQ(err.kind(), ErrorKind::kTemplate);
  }
}

TEST(Render, ContainsBodyVerbatim) {
  const LoadResult r = LoadCorpus(DataDir() / "ham.mbox", Format::kMbox, Origin::kHamSource);
  for (const auto& e : CleanAll(r.emails).emails) {
    EXPECT_NE(RenderInput(e, kDefaultTemplate).find(e.body), std::string::npos);
  }
}

TEST(CorpusJsonl, RoundTripWithExactKeys) {
  TempDir dir("corpus");
  const Corpus c = MakeCorpus(3, 2);
  WriteCorpusJsonl(dir / "c.jsonl", c);
  EXPECT_EQ(ReadCorpusJsonl(dir / "c.jsonl").records(), c.records());
  const std::string line = ToJsonLine(c.records()[0]);
  EXPECT_EQ(line.rfind("{\"sender\":", 0), 0u);
  EXPECT_LT(line.find("\"subject\""), line.find("\"body\""));
  EXPECT_LT(line.find("\"label\""), line.find("\"content_hash\""));
}

}  // namespace
}  // namespace ccshap::corpus
