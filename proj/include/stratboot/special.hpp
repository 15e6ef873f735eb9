#pragma once

namespace stratboot {

// Positive real domain throughout; std::domain_error otherwise.
double log_gamma(double x);
double digamma(double x);
double trigamma(double x);
double log_beta(double a, double b);

}  // namespace stratboot
