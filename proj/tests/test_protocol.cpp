#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "fedkge/protocol.hpp"
#include "helpers.hpp"

using namespace fedkge;

TEST_CASE("change scores: identical, orthogonal, negated, zero rows") {
  Mat cur(4, 2), hist(4, 2);
  // identical
  cur.at(0, 0) = 1; cur.at(0, 1) = 2;
  hist.at(0, 0) = 1; hist.at(0, 1) = 2;
  // orthogonal
  cur.at(1, 0) = 1; hist.at(1, 1) = 1;
  // negated
  cur.at(2, 0) = 3; hist.at(2, 0) = -3;
  // row 3: both zero
  const ChangeScores m = compute_change_scores(cur, hist);
  CHECK(m.m[0] == doctest::Approx(0.0));
  CHECK(m.m[1] == doctest::Approx(1.0));
  CHECK(m.m[2] == doctest::Approx(2.0));
  CHECK(m.m[3] == 0.0);

  Mat bad(3, 2);
  CHECK_THROWS_AS(compute_change_scores(cur, bad), std::invalid_argument);
}

TEST_CASE("top-k selection") {
  SUBCASE("K from the sparsity ratio") {
    ChangeScores m;
    m.m.assign(10, 0.0);
    for (int i = 0; i < 10; ++i) m.m[i] = i;
    const auto [idx, k] = select_topk_upload(m, 0.4);
    CHECK(k == 4);
    CHECK(idx == std::vector<std::int32_t>{6, 7, 8, 9});
  }
  SUBCASE("p = 1 selects everything") {
    ChangeScores m;
    m.m.assign(7, 0.5);
    const auto [idx, k] = select_topk_upload(m, 1.0);
    CHECK(k == 7);
    CHECK(idx.size() == 7);
  }
  SUBCASE("ties break toward the smaller index") {
    ChangeScores m;
    m.m = {0.5, 0.5, 0.1};
    const auto [idx, k] = select_topk_upload(m, 0.34);
    CHECK(k == 1);
    CHECK(idx == std::vector<std::int32_t>{0});
  }
  SUBCASE("empty input") {
    ChangeScores m;
    const auto [idx, k] = select_topk_upload(m, 0.5);
    CHECK(k == 0);
    CHECK(idx.empty());
  }
  SUBCASE("K is at least one") {
    ChangeScores m;
    m.m = {0.3, 0.1, 0.2};
    const auto [idx, k] = select_topk_upload(m, 0.01);
    CHECK(k == 1);
    CHECK(idx == std::vector<std::int32_t>{0});
  }
}

TEST_CASE("top-k equals the stable-sort oracle on random inputs") {
  Rng rng(77);
  for (int trial = 0; trial < 50; ++trial) {
    const auto n = 1 + rng.below(1000);
    ChangeScores m;
    m.m.resize(n);
    for (auto& v : m.m) v = rng.uniform(0.0, 2.0);
    if (trial % 3 == 0) {
      // inject ties
      for (auto& v : m.m) v = std::floor(v * 8.0) / 8.0;
    }
    const double p = rng.uniform(0.05, 1.0);
    const auto [idx, k] = select_topk_upload(m, p);

    std::vector<std::int32_t> oracle(n);
    std::iota(oracle.begin(), oracle.end(), 0);
    std::stable_sort(oracle.begin(), oracle.end(),
                     [&](std::int32_t a, std::int32_t b) {
                       return m.m[a] > m.m[b];
                     });
    oracle.resize(k);
    std::sort(oracle.begin(), oracle.end());
    CHECK(idx == oracle);
  }
}

TEST_CASE("sync schedule") {
  const SyncSchedule s4{4};
  CHECK(is_sync_round(0, s4));
  CHECK(is_sync_round(5, s4));
  CHECK(is_sync_round(10, s4));
  CHECK_FALSE(is_sync_round(3, s4));
  const SyncSchedule s1{1};
  CHECK(is_sync_round(0, s1));
  CHECK_FALSE(is_sync_round(1, s1));
  CHECK(is_sync_round(2, s1));
}

namespace {

// three clients sharing five entities, plus one exclusive entity each
FederationSpec shared5() {
  std::vector<std::vector<int>> own(8);
  for (int g = 0; g < 5; ++g) own[g] = {0, 1, 2};
  own[5] = {0};
  own[6] = {1};
  own[7] = {2};
  return testutil::manual_fed(3, own);
}

}  // namespace

TEST_CASE("build_upload sync and sparse shapes, history refresh") {
  FederationSpec fed = shared5();
  auto& shard = fed.clients[0];
  EmbeddingTable table =
      testutil::table_for_shard(shard, KgeMethod::TransE, 4, 1);
  const SyncSchedule sched{4};

  // round 0 is sync: everything goes
  UploadMessage up0 = build_upload(shard, table, 0, 0.4, sched);
  CHECK(up0.sync);
  CHECK(up0.popcount() == shard.num_shared());
  CHECK(up0.payload.rows() == shard.num_shared());

  // change two shared entities, keep the rest; sparse round picks the movers
  auto r0 = table.entities.row(shard.shared_entities[1]);
  for (auto& v : r0) v += 5.0;
  auto r1 = table.entities.row(shard.shared_entities[3]);
  for (auto& v : r1) v -= 4.0;
  UploadMessage up1 = build_upload(shard, table, 1, 0.4, sched);
  CHECK_FALSE(up1.sync);
  CHECK(up1.popcount() == 2);  // floor(5 * 0.4)
  CHECK(up1.sign[1] == 1);
  CHECK(up1.sign[3] == 1);

  // history was refreshed for what was sent: rebuilding at the next round
  // scores those entities as unchanged
  Mat current(shard.num_shared(), table.entities.cols());
  for (std::size_t i = 0; i < shard.num_shared(); ++i) {
    copy_into(table.entities.row(shard.shared_entities[i]), current.row(i));
  }
  const ChangeScores m = compute_change_scores(current, table.history);
  CHECK(m.m[1] == doctest::Approx(0.0));
  CHECK(m.m[3] == doctest::Approx(0.0));
}

TEST_CASE("personalized aggregation follows the upload counts") {
  FederationSpec fed = shared5();
  std::vector<EmbeddingTable> tables;
  for (int c = 0; c < 3; ++c) {
    tables.push_back(testutil::table_for_shard(fed.clients[c],
                                               KgeMethod::TransE, 4, 10 + c));
  }
  const SyncSchedule sched{4};
  std::vector<UploadMessage> uploads;
  for (int c = 0; c < 3; ++c) {
    // sparse round: K = 2 of 5 shared entities
    uploads.push_back(build_upload(fed.clients[c], tables[c], 1, 0.4, sched));
  }

  for (int target = 0; target < 3; ++target) {
    const auto agg = server_aggregate_personalized(uploads, target, fed);
    for (const auto& [g, entry] : agg) {
      // recompute the sum from the raw uploads, skipping the target
      std::vector<double> expect(4, 0.0);
      std::uint32_t count = 0;
      for (int c = 0; c < 3; ++c) {
        if (c == target) continue;
        const auto& shard = fed.clients[c];
        std::size_t row = 0;
        for (std::size_t i = 0; i < uploads[c].sign.size(); ++i) {
          if (!uploads[c].sign[i]) continue;
          if (shard.local_to_global[shard.shared_entities[i]] == g) {
            axpy(1.0, uploads[c].payload.row(row), expect);
            ++count;
          }
          ++row;
        }
      }
      CHECK(count == entry.count);
      CHECK(count >= 1);
      for (int k = 0; k < 4; ++k) {
        CHECK(entry.sum[k] == doctest::Approx(expect[k]).epsilon(1e-15));
      }
    }
  }

  SUBCASE("duplicate uploads rejected") {
    auto dup = uploads;
    dup.push_back(uploads[0]);
    CHECK_THROWS_AS(server_aggregate_personalized(dup, 0, fed),
                    std::invalid_argument);
  }
}

TEST_CASE("self-exclusion: own upload never reaches own aggregate") {
  // entity 0 shared by all; only client 0 uploads it
  FederationSpec fed = shared5();
  std::vector<UploadMessage> uploads(3);
  for (int c = 0; c < 3; ++c) {
    uploads[c].client_id = c;
    uploads[c].round = 1;
    uploads[c].sign.assign(fed.clients[c].num_shared(), 0);
    uploads[c].payload = Mat(0, 2);
  }
  uploads[0].sign[0] = 1;
  uploads[0].payload = Mat(1, 2);
  uploads[0].payload.at(0, 0) = 42.0;

  const auto own_agg = server_aggregate_personalized(uploads, 0, fed);
  CHECK(own_agg.empty());  // nobody else uploaded anything for client 0
  const auto other_agg = server_aggregate_personalized(uploads, 1, fed);
  REQUIRE(other_agg.size() == 1);
  CHECK(other_agg.begin()->second.count == 1);
  CHECK(other_agg.begin()->second.sum[0] == 42.0);
}

TEST_CASE("download selection: priorities, boundary ties, shortfall") {
  FederationSpec fed = shared5();
  const auto& shard = fed.clients[0];

  std::map<std::int32_t, AggregateEntry> agg;
  agg[0] = AggregateEntry{{1, 1}, 3};
  agg[1] = AggregateEntry{{2, 2}, 1};
  agg[2] = AggregateEntry{{3, 3}, 1};

  SUBCASE("boundary tie resolved by the seeded rng") {
    Rng tie(123);
    // K = floor(5 * 0.4) = 2: entity 0 always in; one of {1, 2} random
    const DownloadMessage msg =
        server_select_topk_download(agg, shard, 1, 0.4, tie);
    CHECK(msg.popcount() == 2);
    CHECK(msg.priority.size() == 2);
    CHECK(msg.sign[0] == 1);
    CHECK(msg.sign[1] + msg.sign[2] == 1);
    CHECK(msg.priority[0] == 3);
    CHECK(msg.priority[1] == 1);

    // both tied entities are reachable across seeds
    bool saw1 = false, saw2 = false;
    for (std::uint64_t s = 0; s < 32; ++s) {
      Rng r2(s);
      const auto m2 = server_select_topk_download(agg, shard, 1, 0.4, r2);
      saw1 |= m2.sign[1] == 1;
      saw2 |= m2.sign[2] == 1;
    }
    CHECK(saw1);
    CHECK(saw2);
  }

  SUBCASE("fewer aggregates than K sends everything") {
    std::map<std::int32_t, AggregateEntry> two;
    two[1] = AggregateEntry{{1, 1}, 2};
    two[4] = AggregateEntry{{2, 2}, 1};
    Rng tie(5);
    const DownloadMessage msg =
        server_select_topk_download(two, shard, 1, 0.8, tie);  // K = 4
    CHECK(msg.popcount() == 2);
    CHECK(msg.payload.rows() == 2);
  }

  SUBCASE("no aggregates at all") {
    std::map<std::int32_t, AggregateEntry> none;
    Rng tie(5);
    const DownloadMessage msg =
        server_select_topk_download(none, shard, 1, 0.5, tie);
    CHECK(msg.popcount() == 0);
    CHECK(msg.payload.rows() == 0);
    CHECK(std::all_of(msg.sign.begin(), msg.sign.end(),
                      [](std::uint8_t b) { return b == 0; }));
  }
}

TEST_CASE("client merge applies (A + E) / (1 + P)") {
  FederationSpec fed = shared5();
  const auto& shard = fed.clients[0];
  EmbeddingTable table =
      testutil::table_for_shard(shard, KgeMethod::TransE, 2, 3);

  const std::vector<double> u1{1.0, 2.0}, u2{0.5, -1.0};
  const std::vector<double> before(
      table.entities.row(shard.shared_entities[2]).begin(),
      table.entities.row(shard.shared_entities[2]).end());
  const std::vector<double> hist_before(table.history.row(2).begin(),
                                        table.history.row(2).end());

  DownloadMessage msg;
  msg.client_id = 0;
  msg.round = 1;
  msg.sign.assign(shard.num_shared(), 0);
  msg.sign[2] = 1;
  msg.priority = {2};
  msg.payload = Mat(1, 2);
  msg.payload.at(0, 0) = u1[0] + u2[0];
  msg.payload.at(0, 1) = u1[1] + u2[1];

  client_merge(shard, table, msg);
  auto row = table.entities.row(shard.shared_entities[2]);
  for (int k = 0; k < 2; ++k) {
    CHECK(row[k] ==
          doctest::Approx((u1[k] + u2[k] + before[k]) / 3.0).epsilon(1e-15));
  }
  // history untouched by downloads
  auto hist = table.history.row(2);
  for (int k = 0; k < 2; ++k) CHECK(hist[k] == hist_before[k]);

  SUBCASE("pairwise mean at P = 1") {
    DownloadMessage one;
    one.sign.assign(shard.num_shared(), 0);
    one.sign[0] = 1;
    one.priority = {1};
    one.payload = Mat(1, 2);
    one.payload.at(0, 0) = 4.0;
    one.payload.at(0, 1) = 0.0;
    const double e0 = table.entities.at(shard.shared_entities[0], 0);
    client_merge(shard, table, one);
    CHECK(table.entities.at(shard.shared_entities[0], 0) ==
          doctest::Approx((4.0 + e0) / 2.0));
  }

  SUBCASE("priority below one is rejected") {
    DownloadMessage bad = msg;
    bad.priority = {0};
    CHECK_THROWS_AS(client_merge(shard, table, bad), std::invalid_argument);
  }
}

TEST_CASE("full sync: owner mean, exclusive exclusion, coherence") {
  FederationSpec fed = shared5();
  std::vector<EmbeddingTable> tables;
  std::vector<UploadMessage> uploads;
  const SyncSchedule sched{4};
  for (int c = 0; c < 3; ++c) {
    tables.push_back(testutil::table_for_shard(fed.clients[c],
                                               KgeMethod::TransE, 3, 30 + c));
    uploads.push_back(build_upload(fed.clients[c], tables[c], 0, 0.4, sched));
  }

  const auto downloads = full_sync_exchange(uploads, fed);
  for (int c = 0; c < 3; ++c) {
    CHECK(downloads[c].sync);
    CHECK(downloads[c].popcount() == fed.clients[c].num_shared());
    apply_sync_download(fed.clients[c], tables[c], downloads[c]);
  }

  // all owners agree exactly afterwards, and the value is the mean
  for (int g = 0; g < 5; ++g) {
    std::vector<double> manual(3, 0.0);
    for (int c = 0; c < 3; ++c) {
      const auto& shard = fed.clients[c];
      const auto local = static_cast<std::size_t>(
          std::find(shard.local_to_global.begin(), shard.local_to_global.end(),
                    g) -
          shard.local_to_global.begin());
      auto pos = std::lower_bound(shard.shared_entities.begin(),
                                  shard.shared_entities.end(),
                                  static_cast<std::int32_t>(local)) -
                 shard.shared_entities.begin();
      axpy(1.0 / 3.0, uploads[c].payload.row(pos), manual);
    }
    for (int c = 0; c < 3; ++c) {
      const auto& shard = fed.clients[c];
      const auto local = static_cast<std::size_t>(
          std::find(shard.local_to_global.begin(), shard.local_to_global.end(),
                    g) -
          shard.local_to_global.begin());
      auto row = tables[c].entities.row(local);
      auto hist_pos = std::lower_bound(shard.shared_entities.begin(),
                                       shard.shared_entities.end(),
                                       static_cast<std::int32_t>(local)) -
                      shard.shared_entities.begin();
      for (int k = 0; k < 3; ++k) {
        CHECK(std::abs(row[k] - manual[k]) <= 1e-12);
        // history now holds the synchronized value
        CHECK(tables[c].history.at(hist_pos, k) == row[k]);
      }
    }
  }

  SUBCASE("partial upload in a sync round is an error") {
    auto bad = uploads;
    bad[1].sign[0] = 0;
    CHECK_THROWS_AS(full_sync_exchange(bad, fed), std::invalid_argument);
  }
}

TEST_CASE("p = 1 sparse round reduces to the FedE owner mean") {
  FederationSpec fed = shared5();
  std::vector<EmbeddingTable> tables;
  const SyncSchedule sched{4};
  for (int c = 0; c < 3; ++c) {
    tables.push_back(testutil::table_for_shard(fed.clients[c],
                                               KgeMethod::TransE, 4, 50 + c));
  }
  // keep pristine copies for the oracle
  const std::vector<EmbeddingTable> before = tables;

  std::vector<UploadMessage> uploads;
  for (int c = 0; c < 3; ++c) {
    uploads.push_back(build_upload(fed.clients[c], tables[c], 1, 1.0, sched));
    CHECK(uploads[c].popcount() == fed.clients[c].num_shared());
  }
  for (int c = 0; c < 3; ++c) {
    const auto agg = server_aggregate_personalized(uploads, c, fed);
    Rng tie(99);
    const auto msg = server_select_topk_download(agg, fed.clients[c], 1, 1.0, tie);
    client_merge(fed.clients[c], tables[c], msg);
  }

  for (int g = 0; g < 5; ++g) {
    // independent owner-mean oracle from the pristine tables
    std::vector<double> mean(4, 0.0);
    for (int c = 0; c < 3; ++c) {
      const auto& shard = fed.clients[c];
      const auto local = static_cast<std::size_t>(
          std::find(shard.local_to_global.begin(), shard.local_to_global.end(),
                    g) -
          shard.local_to_global.begin());
      axpy(1.0 / 3.0, before[c].entities.row(local), mean);
    }
    for (int c = 0; c < 3; ++c) {
      const auto& shard = fed.clients[c];
      const auto local = static_cast<std::size_t>(
          std::find(shard.local_to_global.begin(), shard.local_to_global.end(),
                    g) -
          shard.local_to_global.begin());
      auto row = tables[c].entities.row(local);
      for (int k = 0; k < 4; ++k) CHECK(std::abs(row[k] - mean[k]) <= 1e-12);
    }
  }
}

TEST_CASE("wire record round trip") {
  Mat payload(3, 4);
  Rng rng(8);
  for (auto& v : payload.data()) v = rng.uniform(-2, 2);
  const std::vector<std::uint8_t> sign{1, 0, 1, 0, 0, 0, 0, 0, 1, 0, 1};
  const std::vector<std::uint32_t> priority{2, 1, 3};

  const auto bytes = encode_message(7, 42, sign, priority, payload);
  // header + packed sign + priorities + f32 payload
  CHECK(bytes.size() == 16 + 2 + 12 + 48);
  const DecodedMessage msg = decode_message(bytes, true, 4);
  CHECK(msg.client_id == 7);
  CHECK(msg.round == 42);
  CHECK(msg.sign == sign);
  CHECK(msg.priority == priority);
  REQUIRE(msg.payload.rows() == 3);
  for (std::size_t i = 0; i < payload.data().size(); ++i) {
    // payload travels as f32
    CHECK(msg.payload.data()[i] ==
          doctest::Approx(payload.data()[i]).epsilon(1e-6));
  }

  const auto up_bytes = encode_message(1, 3, sign, {}, payload);
  const DecodedMessage up = decode_message(up_bytes, false, 4);
  CHECK(up.priority.empty());
  CHECK(up.sign == sign);
}
