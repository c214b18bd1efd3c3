#pragma once

namespace ndvicast::stats {

/// Regularized incomplete beta I_x(a, b), by Lentz's continued fraction.
double incomplete_beta(double x, double a, double b);

/// Upper tail P(F > f) of the F(d1, d2) distribution.
double f_survival(double f, double d1, double d2);

}  // namespace ndvicast::stats
