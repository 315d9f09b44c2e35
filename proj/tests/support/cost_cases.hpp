#pragma once

#include <vector>

#include "hwnas/genotype.hpp"

namespace cost_cases {

using hwnas::LayerDescriptor;
using hwnas::LayerType;

// {type, ifm, in_channels, in_capsules, kernel, stride, ofm, out_channels, out_capsules}
inline std::vector<LayerDescriptor> descriptors() {
  const auto C = LayerType::Conv;
  const auto CC = LayerType::ConvCapsule;
  const auto F = LayerType::FullyConnected;
  const auto FC = LayerType::FullyConnectedCapsule;
  return {
      {C, 28, 1, 1, 3, 1, 26, 8, 1},       // w 72, s 9, f 676
      {C, 28, 1, 1, 9, 1, 20, 256, 1},     // first stage of the original capsule net
      {CC, 20, 256, 1, 9, 2, 6, 32, 8},    // primary capsules
      {FC, 6, 32, 8, 6, 1, 1, 10, 16},     // class capsules
      {FC, 1, 32, 8, 1, 1, 1, 10, 16},     // w 40960, s 256, f 1
      {C, 12, 1, 1, 3, 1, 10, 16, 1},      // c 244
      {C, 86, 5, 1, 1, 1, 86, 28, 1},      // c 7676
      {C, 1, 1, 1, 1, 1, 1, 1, 1},         // single weight
      {C, 5, 1, 1, 5, 1, 1, 1, 1},         // s 25, f 1 on a conv
      {C, 32, 3, 1, 3, 1, 30, 64, 1},
      {C, 32, 3, 1, 5, 2, 14, 16, 1},
      {CC, 14, 16, 1, 3, 1, 12, 8, 4},
      {CC, 12, 8, 4, 3, 2, 5, 8, 8},
      {CC, 9, 2, 1, 3, 1, 7, 1, 1},        // s 18, just above the row count
      {C, 10, 1, 1, 4, 1, 7, 1, 1},        // s 16 exactly
      {C, 10, 1, 1, 1, 1, 10, 17, 1},      // s 1, w 17: spills one group
      {F, 4, 16, 1, 4, 1, 1, 64, 1},
      {F, 1, 64, 1, 1, 1, 1, 10, 1},
      {FC, 3, 64, 64, 3, 1, 1, 10, 64},
      {FC, 1, 10, 16, 1, 1, 1, 1, 1},
      {C, 64, 64, 1, 9, 1, 56, 64, 1},
      {CC, 28, 64, 64, 9, 2, 10, 64, 64},  // large but inside 64 bits
      {C, 20, 2, 1, 3, 2, 9, 2, 1},
      {C, 7, 7, 1, 1, 1, 7, 128, 1},
      {F, 2, 1, 1, 2, 1, 1, 1, 1},         // s 4, f 1
  };
}

}  // namespace cost_cases
