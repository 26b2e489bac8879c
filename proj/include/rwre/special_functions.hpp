#pragma once

namespace rwre {

// log Gamma(x), x > 0.
double log_gamma(double x);

// psi(x) = (log Gamma)'(x), x > 0.
double digamma(double x);

// log B(a, b) = log Gamma(a) + log Gamma(b) - log Gamma(a + b).
double log_beta(double a, double b);

}  // namespace rwre
