#include <gtest/gtest.h>

#include "ssbc/report_builder.hpp"

using namespace ssbc;

TEST(Prevalence, RateAndInterval) {
  std::vector<LabelSet> turns{LabelSet{SsbcLabel::advice}, LabelSet{}, LabelSet{SsbcLabel::advice}, LabelSet{}};
  const auto p = prevalence_report(turns);
  EXPECT_EQ(p.n_turns, 4u);
  EXPECT_EQ(p.rates.front().tag, SsbcLabel::advice);
  EXPECT_DOUBLE_EQ(p.rates.front().rate, 0.5);
  EXPECT_NEAR(p.rates.front().ci_high - 0.5, 0.49, 1e-12);
  EXPECT_NEAR(0.5 - p.rates.front().ci_low, 0.49, 1e-12);
  EXPECT_DOUBLE_EQ(p.rates.back().rate, 0.0);
  EXPECT_DOUBLE_EQ(p.rates.back().ci_low, 0.0);
  // ties keep table order
  EXPECT_EQ(p.rates[1].tag, SsbcLabel::sympathy);
  const auto back = prevalence_from_json(to_json(p));
  EXPECT_EQ(back.rates.size(), p.rates.size());
  EXPECT_EQ(back.rates[0].ci_high, p.rates[0].ci_high);
  EXPECT_THROW(prevalence_report({}), PreconditionError);
}

TEST(Render, NumbersAndCsv) {
  EXPECT_EQ(format_number(0.1), "0.1");
  EXPECT_EQ(format_number(2.0), "2.0");
  EXPECT_EQ(std::stod(format_number(1.0 / 3.0)), 1.0 / 3.0);
  Table t{"T", {"a", "b"}, {{"x,y", "1"}, {"q\"r", "2"}}, "note"};
  EXPECT_EQ(render_csv(t), "a,b\n\"x,y\",1\n\"q\"\"r\",2\n");
  const auto md = render_markdown(t);
  EXPECT_NE(md.find("## T"), std::string::npos);
  EXPECT_NE(md.find("| a | b |"), std::string::npos);
  EXPECT_NE(md.find("_note_"), std::string::npos);
}

TEST(DistressTable, FilterAndOrder) {
  std::vector<stats::ContingencyResult> rs(3);
  rs[0].tag = SsbcLabel::teaching;
  rs[0].chi2 = 143.5;
  rs[0].reject = true;
  rs[0].levels = {"none", "moderate+"};
  rs[0].per_level_rates = {{"none", 0.358}, {"moderate+", 0.083}};
  rs[1].tag = SsbcLabel::relief_of_blame;
  rs[1].chi2 = 11.7;
  rs[1].reject = true;
  rs[2].tag = SsbcLabel::advice;
  rs[2].chi2 = 1.0;
  auto t = distress_report(rs);
  ASSERT_EQ(t.rows.size(), 2u);
  EXPECT_EQ(t.rows[0][0], "teaching");
  EXPECT_EQ(t.rows[1][0], "relief_of_blame");
  EXPECT_EQ(t.rows[0][2], "0.358");
  EXPECT_EQ(t.rows[0][4], "143.5");
  t = distress_report(std::span(rs).subspan(2));
  EXPECT_TRUE(t.rows.empty());
  EXPECT_FALSE(t.note.empty());
}

TEST(CommunityTable, HighestLowestAndTies) {
  stats::ContingencyResult r;
  r.tag = SsbcLabel::advice;
  r.reject = true;
  r.levels = {"r/Daddit", "r/TwoXChromosomes", "r/X"};
  r.per_level_rates = {{"r/Daddit", 0.664}, {"r/TwoXChromosomes", 0.498}, {"r/X", 0.664}};
  const std::vector<stats::ContingencyResult> rs{r};
  const auto t = community_report(rs, {});
  ASSERT_EQ(t.spread.rows.size(), 1u);
  EXPECT_EQ(t.spread.rows[0][2], "r/Daddit; r/X");
  EXPECT_EQ(t.spread.rows[0][4], "r/TwoXChromosomes");
  EXPECT_EQ(t.spread.rows[0][9], "yes");
  stats::ContingencyResult one;
  one.levels = {"r/A"};
  const std::vector<stats::ContingencyResult> single{one};
  EXPECT_THROW(community_report(single, {}), PreconditionError);
}

TEST(CrossModel, DeltasAndGuard) {
  std::vector<LabelSet> a{LabelSet{SsbcLabel::sympathy}, LabelSet{}}, b{LabelSet{SsbcLabel::sympathy}, LabelSet{}};
  const auto pa = prevalence_report(a), pb = prevalence_report(b);
  const auto same = cross_model_report("A", pa, "h", "B", pb, "h");
  for (const auto& row : same.rows) EXPECT_EQ(row.delta_pp, 0.0);
  EXPECT_THROW(cross_model_report("A", pa, "h1", "B", pb, "h2"), PreconditionError);
  std::vector<LabelSet> c{LabelSet{SsbcLabel::sympathy}, LabelSet{SsbcLabel::sympathy}};
  const auto diff = cross_model_report("A", pa, "h", "B", prevalence_report(c), "h");
  EXPECT_NEAR(diff.rows[0].delta_pp, 50.0, 1e-12);
  EXPECT_EQ(cross_model_table(diff).rows.size(), kLabelCount);
}

TEST(Vignette, LateOnlyAndSingleOnly) {
  Conversation conv{"c1", "p1", "agent", {}, true, ""};
  const std::vector<LabelSet> traj{LabelSet{SsbcLabel::advice}, LabelSet{SsbcLabel::advice},
                                   LabelSet{SsbcLabel::validation}, LabelSet{SsbcLabel::compliment}};
  for (std::size_t i = 0; i < traj.size(); ++i) conv.turns.push_back({i, "u", "a", traj[i], {}});
  SingleTurnResult single{"p1", "prompt", "reply", LabelSet{SsbcLabel::advice, SsbcLabel::referral}};
  const auto v = vignette_comparison(conv, single);
  EXPECT_EQ(v.late_start, 2u);
  EXPECT_EQ(v.late_only, bit(SsbcLabel::validation) | bit(SsbcLabel::compliment));
  EXPECT_EQ(v.single_only, bit(SsbcLabel::referral));
  EXPECT_EQ(vignette_table(v).rows.size(), 5u);

  SingleTurnResult same{"p1", "p", "r", LabelSet{SsbcLabel::advice, SsbcLabel::validation, SsbcLabel::compliment}};
  const auto e = vignette_comparison(conv, same);
  EXPECT_EQ(e.late_only, 0);
  EXPECT_EQ(e.single_only, 0);
  EXPECT_THROW(vignette_comparison(conv, std::nullopt), PreconditionError);
}
