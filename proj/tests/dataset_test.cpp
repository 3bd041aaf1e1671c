#include <aggropt/dataset.hpp>

#include <gtest/gtest.h>

#include <sstream>
#include <string>

namespace aggropt {
namespace {

LoggedDataset small_dataset() {
  LoggedDataset ds;
  ds.records = {{0, 1, 1.0, 0.25}, {0, 0, 0.0, 0.5}, {1, 2, 0.3333333333333333, 0.1}};
  return ds;
}

TEST(DatasetCsv, RoundTripIsExact) {
  const auto ds = small_dataset();
  std::stringstream buffer;
  write_dataset_csv(buffer, ds);
  const auto back = read_dataset_csv(buffer);
  EXPECT_EQ(back.records, ds.records);
  EXPECT_EQ(back.content_hash(), ds.content_hash());
}

TEST(DatasetCsv, ToleratesWhitespaceAndBlankLines) {
  std::istringstream in("context,action,reward,propensity\r\n 0 , 1 , 1 , 0.5 \n\n0,0,0,0.5\n");
  const auto ds = read_dataset_csv(in);
  ASSERT_EQ(ds.size(), 2u);
  EXPECT_EQ(ds.records[0].action, 1u);
}

TEST(DatasetCsv, ReadThrowsAtFirstBadLine) {
  std::istringstream in("context,action,reward,propensity\n0,1,1,0.5\n0,1,-1,0.5\n0,1,1,0\n");
  try {
    read_dataset_csv(in);
    FAIL() << "expected DataValidationError";
  } catch (const DataValidationError& e) {
    EXPECT_EQ(e.location(), 3u);
  }
}

TEST(DatasetCsv, RejectsBadHeader) {
  std::istringstream in("a,b,c,d\n0,1,1,0.5\n");
  EXPECT_THROW(read_dataset_csv(in), DataValidationError);
}

TEST(DatasetLint, ReportsEveryProblemWithLineNumbers) {
  std::istringstream in(
      "context,action,reward,propensity\n"
      "0,1,1,0.5\n"
      "0,1,1,0\n"
      "0,1,-0.5,0.5\n"
      "0,9,1,0.5\n"
      "0,-1,1,0.5\n"
      "0,1,abc,0.5\n"
      "0,1,1\n"
      "0,1,1,1.5\n"
      "0,1,1,1e-13\n");
  const auto issues = lint_dataset_csv(in, std::nullopt, 5);
  std::vector<std::size_t> lines;
  for (const auto& issue : issues) {
    lines.push_back(issue.line);
  }
  EXPECT_EQ(lines, (std::vector<std::size_t>{3, 4, 5, 6, 7, 8, 9, 10}));
}

TEST(DatasetLint, CleanFileHasNoIssues) {
  std::stringstream buffer;
  write_dataset_csv(buffer, small_dataset());
  EXPECT_TRUE(lint_dataset_csv(buffer, 2, 3).empty());
}

TEST(DatasetLint, ContextBoundIsChecked) {
  std::istringstream in("context,action,reward,propensity\n2,0,1,0.5\n");
  const auto issues = lint_dataset_csv(in, 2, std::nullopt);
  ASSERT_EQ(issues.size(), 1u);
  EXPECT_EQ(issues[0].line, 2u);
}

TEST(DatasetValidate, NamesRecordIndex) {
  auto ds = small_dataset();
  ds.records[1].reward = -1.0;
  try {
    validate(ds, SoftmaxPolicy(2, 3));
    FAIL() << "expected DataValidationError";
  } catch (const DataValidationError& e) {
    EXPECT_EQ(e.location(), 1u);
  }
  EXPECT_NO_THROW(validate(small_dataset(), SoftmaxPolicy(2, 3)));
  EXPECT_THROW(validate(small_dataset(), SoftmaxPolicy(2, 2)), DataValidationError);
}

TEST(DatasetHash, SensitiveToContentAndOrder) {
  const auto ds = small_dataset();
  auto changed = ds;
  changed.records[2].reward = 0.0;
  auto swapped = ds;
  std::swap(swapped.records[0], swapped.records[1]);
  EXPECT_NE(ds.content_hash(), changed.content_hash());
  EXPECT_NE(ds.content_hash(), swapped.content_hash());
  EXPECT_EQ(ds.content_hash(), small_dataset().content_hash());
}

TEST(SampleCountMode, ParsesAndPrints) {
  EXPECT_EQ(parse_sample_count_mode("fixed"), SampleCountMode::kFixedN);
  EXPECT_EQ(parse_sample_count_mode("poisson"), SampleCountMode::kPoissonN);
  EXPECT_EQ(to_string(SampleCountMode::kFixedN), "fixed");
  EXPECT_THROW(parse_sample_count_mode("other"), ConfigError);
}

TEST(Dataset, TotalReward) {
  EXPECT_NEAR(small_dataset().total_reward(), 1.0 + 1.0 / 3.0, 1e-15);
}

}  // namespace
}  // namespace aggropt
