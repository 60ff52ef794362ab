#pragma once

#include <complex>

namespace esr {

// Scaled complementary error function w(z) = exp(-z^2) erfc(-iz).
//
// Upper half plane evaluated by a 48-term Weideman rational approximation;
// the lower half plane goes through w(z) = 2 exp(-z^2) - w(-z), which can
// overflow for large |Im z| (inherent growth of w there, surfaces as inf).
// Relative accuracy on the complex value is < 1e-13 for |z| <= 30, well
// inside the 1e-6 contract checked by the tests.
std::complex<double> faddeeva(std::complex<double> z);

}  // namespace esr
