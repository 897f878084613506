#pragma once

#include <vector>

#include <boost/multiprecision/cpp_dec_float.hpp>

namespace akhcfs::testing {

using Decimal50 = boost::multiprecision::cpp_dec_float_50;

struct DecimalTrace {
  std::vector<Decimal50> p;
  std::vector<Decimal50> k;
  Decimal50 p_final;
};

// Independent 50-digit covariance recursion from A_1 over N-1 iterations.
inline DecimalTrace decimal_kf(int n, const Decimal50& q, const Decimal50& r, const Decimal50& a1) {
  DecimalTrace out;
  Decimal50 a = a1;
  for (int i = 1; i < n; ++i) {
    const Decimal50 p = a + q;
    const Decimal50 k = p / (p + r);
    out.p.push_back(p);
    out.k.push_back(k);
    a = (Decimal50(1) - k) * p;
  }
  out.p_final = a + q;
  out.p.push_back(out.p_final);
  return out;
}

inline Decimal50 decimal(const char* text) { return Decimal50(text); }

}  // namespace akhcfs::testing
