#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <random>
#include <sstream>

#include "irr/matrix.hpp"
#include "oracles.hpp"

using irr::Matrix;

TEST(Matrix, RejectsNonFiniteOnConstruction) {
    const double nan = std::numeric_limits<double>::quiet_NaN();
    EXPECT_THROW(Matrix(1, 2, std::vector<double>{1.0, nan}), irr::InvalidInput);
    EXPECT_THROW(Matrix(2, 2, std::numeric_limits<double>::infinity()), irr::InvalidInput);
    EXPECT_THROW(Matrix(2, 2, std::vector<double>{1.0, 2.0, 3.0}), irr::DimensionMismatch);
}

TEST(Matrix, ProductsAgree) {
    std::mt19937_64 rng(3);
    auto a = oracle::random_matrix(5, 3, rng);
    auto b = oracle::random_matrix(5, 4, rng);
    EXPECT_LT(oracle::max_abs_diff(irr::matmul_tn(a, b), irr::matmul(a.transpose(), b)), 1e-14);
}

TEST(Matrix, BinaryRoundTripIsBitExact) {
    std::mt19937_64 rng(11);
    auto m = oracle::random_matrix(7, 3, rng, -1e6, 1e6);
    std::stringstream ss;
    irr::write_binary(ss, m);
    const std::string bytes = ss.str();
    ASSERT_EQ(bytes.size(), 4 + 8 + 8 + 7 * 3 * 8);
    EXPECT_EQ(bytes.substr(0, 4), "SSM1");
    EXPECT_EQ(static_cast<unsigned char>(bytes[4]), 7);  // rows, little-endian
    EXPECT_EQ(static_cast<unsigned char>(bytes[12]), 3);
    EXPECT_EQ(irr::read_binary(ss), m);
}

TEST(Matrix, BinaryRejectsBadMagicAndTruncation) {
    std::stringstream bad("SSM2xxxxxxxxxxxxxxxx");
    EXPECT_THROW(irr::read_binary(bad), irr::DataError);
    std::stringstream ss;
    irr::write_binary(ss, Matrix{{1.0, 2.0}});
    std::string s = ss.str();
    std::stringstream trunc(s.substr(0, s.size() - 3));
    EXPECT_THROW(irr::read_binary(trunc), irr::DataError);
}

TEST(Matrix, CsvWithAndWithoutHeader) {
    std::stringstream with("a,b\n1,2\n3,4.5\n");
    std::stringstream without("1,2\n3,4.5\n");
    Matrix expect{{1, 2}, {3, 4.5}};
    EXPECT_EQ(irr::read_csv(with), expect);
    EXPECT_EQ(irr::read_csv(without), expect);
    std::stringstream ragged("1,2\n3\n");
    EXPECT_THROW(irr::read_csv(ragged), irr::DataError);
}

TEST(Matrix, CsvRoundTripPreservesDoubles) {
    std::mt19937_64 rng(5);
    auto m = oracle::random_matrix(4, 6, rng);
    std::stringstream ss;
    irr::write_csv(ss, m);
    EXPECT_EQ(irr::read_csv(ss), m);
}
