#pragma once

#include <array>

namespace mpx::quadrature {

struct Rule1D {
  std::array<double, 4> nodes;    // on [0, 1]
  std::array<double, 4> weights;  // sum to 1
};

/// 4-point Gauss-Legendre on [0, 1], exact for degree 7.
inline constexpr Rule1D gauss4 = {
    {0.5 - 0.4305681557970263, 0.5 - 0.1699905217924281, 0.5 + 0.1699905217924281,
     0.5 + 0.4305681557970263},
    {0.1739274225687269, 0.3260725774312731, 0.3260725774312731, 0.1739274225687269}};

struct RuleTri {
  std::array<std::array<double, 3>, 6> bary;
  std::array<double, 6> weights;  // sum to 1
};

/// 6-point symmetric rule on the triangle, exact for degree 4.
inline constexpr RuleTri dunavant4 = {
    {{{0.108103018168070, 0.445948490915965, 0.445948490915965},
      {0.445948490915965, 0.108103018168070, 0.445948490915965},
      {0.445948490915965, 0.445948490915965, 0.108103018168070},
      {0.816847572980459, 0.091576213509771, 0.091576213509771},
      {0.091576213509771, 0.816847572980459, 0.091576213509771},
      {0.091576213509771, 0.091576213509771, 0.816847572980459}}},
    {0.223381589678011, 0.223381589678011, 0.223381589678011, 0.109951743655322,
     0.109951743655322, 0.109951743655322}};

/// 3-point Gauss-Legendre on [0, 1], exact for degree 5.
struct Rule3 {
  std::array<double, 3> nodes;
  std::array<double, 3> weights;
};
inline constexpr Rule3 gauss3 = {
    {0.5 - 0.38729833462074170, 0.5, 0.5 + 0.38729833462074170},
    {5.0 / 18.0, 8.0 / 18.0, 5.0 / 18.0}};

}  // namespace mpx::quadrature
