#include <gtest/gtest.h>

#include "conicwave/expr.hpp"

using namespace cwave;

TEST(Expr, ParsesArithmetic) {
    auto c = expr::Coefficient::compile("0.5 + 2*x - sin(y)/4");
    EXPECT_NEAR(c(0.25, 0.0), 1.0, 1e-15);
    EXPECT_NEAR(c(0.0, kPi / 2), 0.25, 1e-15);
}

TEST(Expr, RewritesRAsInverseX) {
    auto c = expr::Coefficient::compile("r");
    EXPECT_NEAR(c(0.2, 0.0), 5.0, 1e-13);
}

TEST(Expr, PowAndPrecedence) {
    auto c = expr::Coefficient::compile("pow(x, 2) + 3*x*x - (x + 1)*(x - 1)");
    // = x^2 + 3x^2 - x^2 + 1 = 3x^2 + 1
    EXPECT_NEAR(c(2.0, 0.0), 13.0, 1e-13);
}

TEST(Expr, SymbolicDerivativesMatchFiniteDifferences) {
    auto c = expr::Coefficient::compile("exp(-x)*cos(2*y) + pow(x, 1.5)/(1 + x)");
    const double x = 0.37, y = 1.1, h = 1e-6;
    const double fx_fd = (c(x + h, y) - c(x - h, y)) / (2 * h);
    const double fy_fd = (c(x, y + h) - c(x, y - h)) / (2 * h);
    EXPECT_NEAR(expr::eval(c.fx, x, y), fx_fd, 1e-8);
    EXPECT_NEAR(expr::eval(c.fy, x, y), fy_fd, 1e-8);
    const double fxx_fd = (c(x + h, y) - 2 * c(x, y) + c(x - h, y)) / (h * h);
    EXPECT_NEAR(expr::eval(c.fxx, x, y), fxx_fd, 1e-3);
}

TEST(Expr, RejectsUnknownIdentifier) {
    EXPECT_THROW(expr::Coefficient::compile("2*q + 1"), std::runtime_error);
    EXPECT_THROW(expr::Coefficient::compile("sin(x"), std::runtime_error);
}
