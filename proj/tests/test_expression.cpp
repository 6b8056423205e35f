#include <gtest/gtest.h>

#include "certilind/expression.hpp"

using namespace certilind;

namespace {

Matrix mat(const PolyOperator& p, int cap = 6) { return Matrix(materialize_sparse(p, TruncationShape::rect(std::vector<int>(p.mode_count(), cap)))); }

std::string error_of(const std::string& src, int modes = 1, const ParamTable& params = {}) {
  try {
    parse_poly(src, modes, params);
  } catch (const ModelError& e) {
    return e.what();
  }
  return "";
}

}  // namespace

TEST(PolyParse, BasicLettersAndArithmetic) {
  auto a = PolyOperator::annihilation(1, 0), ad = PolyOperator::creation(1, 0);
  EXPECT_EQ(parse_poly("a0", 1), a);
  EXPECT_EQ(parse_poly("ad0*a0", 1), ad * a);
  EXPECT_EQ(parse_poly("n0", 1), ad * a);
  EXPECT_EQ(parse_poly("a0^2 - alpha^2", 1, {{"alpha", 1.5}}), a * a - PolyOperator::identity(1) * cd(2.25));
  EXPECT_LT((mat(parse_poly("(a0 + ad0)/sqrt(2)", 1)) - mat(PolyOperator::position(1, 0))).cwiseAbs().maxCoeff(), 1e-15);
  EXPECT_LT((mat(parse_poly("q0*p0 - p0*q0", 1)) - cd(0, 1) * Matrix::Identity(7, 7)).cwiseAbs().maxCoeff(), 1e-14);
}

TEST(PolyParse, MultiModeAndPrecedence) {
  auto p = parse_poly("a0^2*ad1 + a1*ad0^2", 2);
  auto a0 = PolyOperator::annihilation(2, 0), ad0 = PolyOperator::creation(2, 0);
  auto a1 = PolyOperator::annihilation(2, 1), ad1 = PolyOperator::creation(2, 1);
  EXPECT_EQ(p, a0 * a0 * ad1 + a1 * ad0 * ad0);
  EXPECT_EQ(parse_poly("-2*a0 + 3", 1), PolyOperator::annihilation(1, 0) * cd(-2.0) + PolyOperator::scalar(1, 3.0));
  EXPECT_EQ(parse_poly("2^3*id", 1), PolyOperator::scalar(1, 8.0));
  EXPECT_EQ(parse_poly("i*a0", 1), PolyOperator::annihilation(1, 0) * cd(0, 1));
  EXPECT_EQ(parse_poly("(cosh(r)*a0 + sinh(r)*ad0)^2", 1, {{"r", 0.0}}), PolyOperator::annihilation(1, 0).pow(2));
}

TEST(PolyParse, ErrorsNameTheOffendingToken) {
  EXPECT_NE(error_of("a0 + * ad0").find("'*'"), std::string::npos);
  EXPECT_NE(error_of("a0 + bogus").find("'bogus'"), std::string::npos);
  EXPECT_NE(error_of("a3", 2).find("'a3'"), std::string::npos);
  EXPECT_NE(error_of("a0 $ 2").find("'$'"), std::string::npos);
  EXPECT_NE(error_of("a0^-1").find("non-negative"), std::string::npos);
  EXPECT_NE(error_of("a0^1.5").find("non-negative"), std::string::npos);
  EXPECT_NE(error_of("1/a0").find("division"), std::string::npos);
  EXPECT_NE(error_of("sin(a0)").find("scalar"), std::string::npos);
  EXPECT_NE(error_of("t*a0").find("'t'"), std::string::npos);
  EXPECT_NE(error_of("(a0 + 1").find("end of input"), std::string::npos);
  EXPECT_NE(error_of("foo(2)*a0").find("'foo'"), std::string::npos);
}

TEST(ScalarParse, TimeDependenceAndValues) {
  auto e = parse_scalar("sin(t)");
  EXPECT_TRUE(e.time_dependent);
  EXPECT_NEAR(e.fn(0.3).real(), std::sin(0.3), 1e-16);
  auto c = parse_scalar("2*alpha^2 - 1", {{"alpha", 1.5}});
  EXPECT_FALSE(c.time_dependent);
  EXPECT_EQ(c.fn(5.0), cd(3.5));
  EXPECT_NEAR(parse_scalar("exp(i*pi)").fn(0).real(), -1.0, 1e-15);
  EXPECT_NEAR(parse_scalar("cos(2*t)*exp(-t)").fn(1.0).real(), std::cos(2.0) * std::exp(-1.0), 1e-16);
}

TEST(ScalarParse, RejectsOperatorsAndUnknownNames) {
  EXPECT_THROW(parse_scalar("a0*t"), ModelError);
  EXPECT_THROW(parse_scalar("beta*t"), ModelError);
  EXPECT_THROW(parse_scalar("tan(t)"), ModelError);
  EXPECT_THROW(parse_scalar("t +"), ModelError);
}

TEST(FormatPoly, RoundTripsExactly) {
  auto p = parse_poly("0.1*a0^2*ad1 - (2+3*i)*a1*ad0^2 + 1/3*id + n1", 2);
  auto text = format_poly(p);
  EXPECT_EQ(parse_poly(text, 2), p) << text;
  EXPECT_EQ(format_poly(PolyOperator(1)), "0");
  EXPECT_EQ(parse_poly("0", 1), PolyOperator(1));
}

TEST(ReservedNames, Recognized) {
  EXPECT_TRUE(expr::is_reserved_name("a12"));
  EXPECT_TRUE(expr::is_reserved_name("ad0"));
  EXPECT_TRUE(expr::is_reserved_name("t"));
  EXPECT_TRUE(expr::is_reserved_name("sin"));
  EXPECT_FALSE(expr::is_reserved_name("alpha"));
  EXPECT_FALSE(expr::is_reserved_name("ab"));
}
