#pragma once

#include "higgs/geometry.hpp"

#include <doctest.h>

#include <initializer_list>

namespace test {

inline higgs::Vec vec(std::initializer_list<double> v)
{
    higgs::Vec out(static_cast<Eigen::Index>(v.size()));
    Eigen::Index i = 0;
    for (double x : v)
        out[i++] = x;
    return out;
}

inline double rel(double a, double b)
{
    return std::abs(a - b) / std::max(std::abs(b), 1e-300);
}

} // namespace test
