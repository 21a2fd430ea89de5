#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "finterp/dataset.hpp"

using namespace finterp;
namespace fs = std::filesystem;

namespace {

fs::path temp_file(const std::string& name, const std::string& content) {
    auto p = fs::temp_directory_path() / ("finterp_ds_" + name);
    std::ofstream(p) << content;
    return p;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

}  // namespace

TEST(Dataset, LoadFiveByTwo) {
    auto p = temp_file("ok.csv", "0.1,0.2\n0.3,0.4\n0.5,0.6\n0.7,0.8\n0.9,1.0\n");
    auto ts = load_csv(p);
    EXPECT_EQ(ts.size(), 5u);
    EXPECT_EQ(ts.dim(), 2u);
    EXPECT_DOUBLE_EQ(ts.point(3)[1], 0.8);
}

TEST(Dataset, DuplicateRowsRejected) {
    auto p = temp_file("dup.csv", "1,2\n3,4\n1,2\n");
    try {
        load_csv(p);
        FAIL();
    } catch (const ValidationError& e) {
        EXPECT_NE(std::string(e.what()).find("row 3"), std::string::npos) << e.what();
    }
}

TEST(Dataset, EmptyFileRejected) {
    auto p = temp_file("empty.csv", "");
    EXPECT_THROW(load_csv(p), ValidationError);
}

TEST(Dataset, RaggedRowNamesRow) {
    auto p = temp_file("ragged.csv", "1,2\n3\n");
    try {
        load_csv(p);
        FAIL();
    } catch (const ParseError& e) {
        EXPECT_NE(std::string(e.what()).find("row 2"), std::string::npos) << e.what();
    }
}

TEST(Dataset, NonNumericCellRejected) {
    auto p = temp_file("nan.csv", "1,2\n3,abc\n");
    EXPECT_THROW(load_csv(p), ParseError);
}

TEST(Dataset, SaveSingleScalar) {
    auto ts = TrainingSet::from_points({{0.3}});
    auto p = fs::temp_directory_path() / "finterp_ds_single.csv";
    save_csv(ts, p);
    EXPECT_EQ(slurp(p), "0.3\n");
}

TEST(Dataset, RoundTrip) {
    auto ts = uniform_toy(20, 3, 11);
    auto p = fs::temp_directory_path() / "finterp_ds_rt.csv";
    save_csv(ts, p);
    auto back = load_csv(p);
    ASSERT_EQ(back.size(), ts.size());
    for (std::size_t i = 0; i < ts.coords().size(); ++i) EXPECT_EQ(back.coords()[i], ts.coords()[i]);
}

TEST(Dataset, SaveToUnwritablePathThrows) {
    auto ts = TrainingSet::from_points({{1.0}});
    EXPECT_THROW(save_csv(ts, "/nonexistent_dir_xyz/out.csv"), IoError);
}

TEST(Dataset, UniformToyReproducibleAndInCube) {
    auto a = uniform_toy(5, 2, 7), b = uniform_toy(5, 2, 7);
    ASSERT_EQ(a.size(), 5u);
    for (std::size_t i = 0; i < a.coords().size(); ++i) {
        EXPECT_EQ(a.coords()[i], b.coords()[i]);
        EXPECT_GE(a.coords()[i], 0.0);
        EXPECT_LE(a.coords()[i], 1.0);
    }
    auto one = uniform_toy(1, 1, 99);
    EXPECT_EQ(one.size(), 1u);
    EXPECT_GE(one.point(0)[0], 0.0);
    EXPECT_LE(one.point(0)[0], 1.0);
}

TEST(Dataset, InvalidInputsRejected) {
    EXPECT_THROW(TrainingSet::from_points({}), ValidationError);
    EXPECT_THROW(TrainingSet::from_points({{1.0, NAN}}), ValidationError);
    EXPECT_THROW(TrainingSet::from_points({{1.0}, {1.0, 2.0}}), ValidationError);
}
