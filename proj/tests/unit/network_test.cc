/*
 * Copyright 2026 The sdtriplet Authors.
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */


#include "sdtriplet/network.h"

#include <gtest/gtest.h>

#include <random>

#include "sdtriplet/errors.h"
#include "support/gradcheck.h"

namespace sdtriplet {
namespace {

using testing::MakeProbeProblem;
using testing::ProbeBackbone;
using testing::ProbeDims;

TEST(BackboneTest, RegistryLookup) {
  EXPECT_EQ(LookupBackbone("tiny-conv").conv_channels, (std::vector<int>{8, 16, 32}));
  EXPECT_TRUE(LookupBackbone("tiny-conv-large").realizable);
  EXPECT_FALSE(LookupBackbone("swin-base").realizable);
  try {
    LookupBackbone("resnet50");
    FAIL() << "expected ConfigError";
  } catch (const ConfigError& e) {
    const std::string msg = e.what();
    for (const BackboneSpec& b : BackboneRegistry()) {
      EXPECT_NE(msg.find(b.name), std::string::npos) << msg;
    }
  }
}

TEST(BackboneTest, UnrealizableBackboneCannotBeBuilt) {
  EXPECT_THROW(Network<float>(LookupBackbone("swin-large"), HeadConfig{},
                              HeadDims{10, 0, 0, 0, 0}, 1),
               ConfigError);
}

TEST(BackboneTest, ValidateRejectsOddFeatureMaps) {
  BackboneSpec b = ProbeBackbone();
  b.input_size = 6;
  EXPECT_THROW(b.Validate(), ConfigError);
  b.input_size = 7;
  EXPECT_THROW(b.Validate(), ConfigError);
}

TEST(NetworkTest, ParameterCountMatchesLayout) {
  const BackboneSpec b = ProbeBackbone();
  const HeadConfig heads = HeadConfig::MultiTask(true);
  const Network<double> net(b, heads, ProbeDims(), 1);
  // conv 3->3, conv 3->4, embed 4->6, heads 6->{5,2,3,2,3}
  const size_t expected = (3 * 3 * 9 + 3) + (4 * 3 * 9 + 4) + (6 * 4 + 6) +
                          (6 * 5 + 5) + (6 * 2 + 2) + (6 * 3 + 3) + (6 * 2 + 2) +
                          (6 * 3 + 3);
  EXPECT_EQ(net.num_params(), expected);
  const Network<double> single(b, HeadConfig::TripletOnly(), ProbeDims(), 1);
  EXPECT_EQ(single.num_params(), (3 * 3 * 9 + 3) + (4 * 3 * 9 + 4) + (6 * 4 + 6) +
                                     (6 * 5 + 5));
}

TEST(NetworkTest, InitIsSeedDeterministic) {
  const Network<float> a(ProbeBackbone(), {}, ProbeDims(), 7);
  const Network<float> b(ProbeBackbone(), {}, ProbeDims(), 7);
  const Network<float> c(ProbeBackbone(), {}, ProbeDims(), 8);
  EXPECT_TRUE(std::equal(a.params().begin(), a.params().end(), b.params().begin()));
  EXPECT_FALSE(std::equal(a.params().begin(), a.params().end(), c.params().begin()));
}

TEST(NetworkTest, ForwardShapesFollowEnabledHeads) {
  const auto p = MakeProbeProblem(HeadConfig::MultiTask(false), 3, 2);
  const auto out = p.net.Forward(p.batch());
  EXPECT_EQ(out[Head::kTriplet].rows(), 5);
  EXPECT_EQ(out[Head::kTriplet].cols(), 3);
  EXPECT_EQ(out[Head::kVerb].rows(), 3);
  EXPECT_EQ(out[Head::kPhase].size(), 0);
}

TEST(NetworkTest, ForwardIsPerSampleIndependent) {
  const auto p = MakeProbeProblem(HeadConfig::TripletOnly(), 4, 3);
  const auto all = p.net.Forward(p.batch());
  for (int b = 0; b < 4; ++b) {
    const Image* one[] = {&p.images[b]};
    const auto single = p.net.Forward(one);
    for (int r = 0; r < 5; ++r) {
      EXPECT_NEAR(single[Head::kTriplet](r, 0), all[Head::kTriplet](r, b), 1e-12);
    }
  }
}

TEST(NetworkTest, WrongImageSizeRejected) {
  const auto p = MakeProbeProblem(HeadConfig::TripletOnly(), 1, 4);
  Image wrong(10, 10);
  const Image* batch[] = {&wrong};
  EXPECT_THROW(p.net.Forward(batch), ShapeError);
}

TEST(NetworkTest, ParameterVectorSizeChecked) {
  EXPECT_THROW(Network<double>(ProbeBackbone(), {}, ProbeDims(),
                               std::vector<double>(3, 0.0)),
               ShapeError);
}

TEST(NetworkTest, GradientMatchesCentralDifferences) {
  for (bool phase : {false, true}) {
    const auto p = MakeProbeProblem(HeadConfig::MultiTask(phase), 3, 5);
    const auto grad = testing::ProbeGradient(p);
    std::mt19937_64 rng(9);
    for (int i = 0; i < 10; ++i) {
      EXPECT_LT(testing::DirectionalProbe(p, grad, rng, 1e-5), 1e-4);
    }
  }
}

TEST(NetworkTest, PerParameterGradientOnHeadBias) {
  const auto p = MakeProbeProblem(HeadConfig::TripletOnly(), 2, 6);
  const auto grad = testing::ProbeGradient(p);
  std::vector<double> params(p.net.params().begin(), p.net.params().end());
  const size_t last = params.size() - 1;  // final triplet bias
  auto plus = params, minus = params;
  plus[last] += 1e-6;
  minus[last] -= 1e-6;
  const double fd =
      (testing::ProbeLoss(p, plus) - testing::ProbeLoss(p, minus)) / 2e-6;
  EXPECT_NEAR(grad[last], fd, 1e-7);
}

TEST(AdamTest, FirstStepMovesByLearningRateAgainstGradientSign) {
  Adam adam(3);
  std::vector<float> params = {0.f, 1.f, -1.f};
  const std::vector<float> grad = {2.f, -0.5f, 1e-3f};
  adam.Step(params, grad, 0.01);
  EXPECT_NEAR(params[0], -0.01f, 1e-6);
  EXPECT_NEAR(params[1], 1.01f, 1e-6);
  EXPECT_NEAR(params[2], -1.01f, 1e-5);
  EXPECT_EQ(adam.steps(), 1);
}

TEST(AdamTest, MinimizesQuadratic) {
  Adam adam(2);
  std::vector<float> x = {3.f, -2.f};
  for (int i = 0; i < 2000; ++i) {
    const std::vector<float> g = {2 * x[0], 2 * x[1]};
    adam.Step(x, g, 0.01);
  }
  EXPECT_NEAR(x[0], 0.f, 1e-2);
  EXPECT_NEAR(x[1], 0.f, 1e-2);
}

TEST(AdamTest, SizeMismatchThrows) {
  Adam adam(2);
  std::vector<float> x(3), g(3);
  EXPECT_THROW(adam.Step(x, g, 0.1), ShapeError);
}

}  // namespace
}  // namespace sdtriplet
