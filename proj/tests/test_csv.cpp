#include <cmath>
#include <limits>
#include <sstream>

#include <gtest/gtest.h>

#include "pcreg/csv.hpp"
#include "pcreg/random.hpp"

using namespace pcreg;

TEST(Csv, EscapeOnlyWhenNeeded) {
    EXPECT_EQ(csv::escape("plain"), "plain");
    EXPECT_EQ(csv::escape("a,b"), "\"a,b\"");
    EXPECT_EQ(csv::escape("say \"hi\""), "\"say \"\"hi\"\"\"");
    EXPECT_EQ(csv::escape("two\nlines"), "\"two\nlines\"");
    EXPECT_EQ(csv::escape(""), "");
}

TEST(Csv, RoundTripAwkwardFields) {
    const std::vector<csv::Row> rows{{"id", "note", "value"},
                                     {"a", "comma, inside", "1"},
                                     {"b", "quote \" inside", ""},
                                     {"c", "line\r\nbreak", "-2.5"}};
    std::ostringstream out;
    for (const auto& r : rows) csv::write_row(out, r);
    EXPECT_EQ(csv::parse(out.str()), rows);
}

TEST(Csv, ParsesCrLfAndMissingFinalNewline) {
    const auto rows = csv::parse("a,b\r\n1,2");
    ASSERT_EQ(rows.size(), 2u);
    EXPECT_EQ(rows[1], (csv::Row{"1", "2"}));
}

TEST(Csv, FormatRoundTripsDoubles) {
    Rng rng(1);
    for (int i = 0; i < 1000; ++i) {
        const double v = (rng.uniform() - 0.5) * std::pow(10.0, rng.uniform(-12, 12));
        EXPECT_EQ(std::stod(csv::format(v)), v);
    }
    EXPECT_EQ(csv::format(0.5), "0.5");
    EXPECT_EQ(csv::format(3.0), "3");
}
