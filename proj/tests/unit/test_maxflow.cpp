#include <gtest/gtest.h>

#include <random>

#include "oracles.hpp"
#include "osteoforge/maxflow.hpp"

namespace osteoforge {
namespace {

TEST(MaxFlow, SingleArc) {
  FlowNetwork net(2, 0, 1);
  net.add_edge(0, 1, 5);
  const auto r = max_flow(net);
  EXPECT_EQ(r.flow, 5);
  EXPECT_EQ(r.source_side, (std::vector<std::uint8_t>{1, 0}));
}

TEST(MaxFlow, Diamond) {
  // s=0, a=1, b=2, t=3
  FlowNetwork net(4, 0, 3);
  net.add_edge(0, 1, 3);
  net.add_edge(0, 2, 2);
  net.add_edge(1, 3, 2);
  net.add_edge(2, 3, 3);
  net.add_edge(1, 2, 1);
  const auto r = max_flow(net);
  EXPECT_EQ(r.flow, 5);
  EXPECT_EQ(oracle::min_cut_by_enumeration(net), 5);
  EXPECT_EQ(net.cut_capacity(r.source_side), 5);
}

TEST(MaxFlow, NoPathMeansZeroFlow) {
  FlowNetwork net(3, 0, 2);
  net.add_edge(0, 1, 4);
  const auto r = max_flow(net);
  EXPECT_EQ(r.flow, 0);
  EXPECT_EQ(r.source_side, (std::vector<std::uint8_t>{1, 1, 0}));
}

TEST(MaxFlow, TerminalEdgesAndParallelArcs) {
  FlowNetwork net(4, 2, 3);
  net.add_terminal_edges(0, 4, 1);
  net.add_terminal_edges(1, 0, 6);
  net.add_edge(0, 1, 2, 2);
  net.add_edge(0, 1, 1);
  const auto r = max_flow(net);
  EXPECT_EQ(r.flow, 4);
  EXPECT_EQ(r.flow, oracle::min_cut_by_enumeration(net));
}

TEST(MaxFlow, RandomNetworksMatchCutEnumeration) {
  std::mt19937_64 rng(2024);
  std::uniform_int_distribution<std::size_t> size(2, 10);
  for (int t = 0; t < 300; ++t) {
    const FlowNetwork net = oracle::random_network(rng, size(rng), 10);
    const auto r = max_flow(net);
    ASSERT_EQ(r.flow, oracle::min_cut_by_enumeration(net)) << "trial " << t;
    ASSERT_EQ(net.cut_capacity(r.source_side), r.flow) << "trial " << t;
    ASSERT_EQ(r.source_side[net.source()], 1);
    ASSERT_EQ(r.source_side[net.sink()], 0);
  }
}

TEST(MaxFlow, LargeCapacitiesStayExact) {
  FlowNetwork net(3, 0, 2);
  const Capacity big = Capacity{1} << 50;
  net.add_edge(0, 1, big + 1);
  net.add_edge(1, 2, big);
  EXPECT_EQ(max_flow(net).flow, big);
}

TEST(MaxFlow, RejectsBadInput) {
  EXPECT_THROW(FlowNetwork(2, 0, 0), ValidationError);
  EXPECT_THROW(FlowNetwork(2, 0, 2), ValidationError);
  FlowNetwork net(2, 0, 1);
  EXPECT_THROW(net.add_edge(0, 5, 1), ValidationError);
  EXPECT_THROW(net.add_edge(0, 1, -1), ValidationError);
}

}  // namespace
}  // namespace osteoforge
