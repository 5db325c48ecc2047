#include <gtest/gtest.h>

#include <algorithm>
#include <vector>

#include "shiftup/ids.hpp"

namespace shiftup {
namespace {

TEST(Ids, ValidPatterns) {
  EXPECT_TRUE(is_valid_id("REQ-1", ArtifactType::requirement));
  EXPECT_TRUE(is_valid_id("TC-175", ArtifactType::test));
  EXPECT_TRUE(is_valid_id("ADR-0003", ArtifactType::adr));
  EXPECT_FALSE(is_valid_id("ADR-3", ArtifactType::adr));
  EXPECT_FALSE(is_valid_id("TC-01", ArtifactType::test));
  EXPECT_FALSE(is_valid_id("TC-", ArtifactType::test));
  EXPECT_FALSE(is_valid_id("US-1", ArtifactType::test));
  EXPECT_FALSE(is_valid_id("tc-1", ArtifactType::test));
  EXPECT_FALSE(is_valid_id("TC-1a", ArtifactType::test));
}

TEST(Ids, TypeByPrefix) {
  EXPECT_EQ(type_of("ISS-4"), ArtifactType::issue);
  EXPECT_EQ(type_of("PH-10"), ArtifactType::phase);
  EXPECT_EQ(type_of("web-app"), ArtifactType::unknown);
}

TEST(Ids, NaturalOrder) {
  std::vector<std::string> ids{"PH-10", "PH-2", "PH-1", "ISS-3"};
  std::sort(ids.begin(), ids.end(), IdLess{});
  EXPECT_EQ(ids, (std::vector<std::string>{"ISS-3", "PH-1", "PH-2", "PH-10"}));
}

}  // namespace
}  // namespace shiftup
