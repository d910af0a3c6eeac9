// Copyright (c) 2026 the hefraud authors
// SPDX-License-Identifier: Apache-2.0

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "hefraud/errors.hpp"
#include "hefraud/paillier.hpp"

using namespace hefraud;
using namespace hefraud::paillier;

namespace {
Keypair test_keypair(int bits = 512, uint64_t seed = 7) {
    Rng rng(seed);
    return keygen(bits, rng);
}
}  // namespace

TEST_CASE("keygen produces a modulus of the requested bit length") {
    auto kp = test_keypair(512);
    CHECK(mpz_sizeinbase(kp.pub.n.get_mpz_t(), 2) == 512);

    Rng rng(3);
    auto kp2 = keygen(768, rng);
    CHECK(mpz_sizeinbase(kp2.pub.n.get_mpz_t(), 2) == 768);
}

TEST_CASE("keygen rejects bad sizes") {
    Rng rng(1);
    CHECK_THROWS_AS(keygen(100, rng), ParameterError);
    CHECK_THROWS_AS(keygen(513, rng), ParameterError);
}

TEST_CASE("keygen is deterministic under a seeded rng") {
    Rng a(42), b(42);
    auto k1 = keygen(512, a);
    auto k2 = keygen(512, b);
    CHECK(k1.pub.n == k2.pub.n);
}

TEST_CASE("decrypt inverts encrypt across the plaintext space") {
    auto kp = test_keypair();
    Rng rng(11);

    SUBCASE("zero") {
        auto ct = encrypt(kp.pub, 0, rng);
        CHECK(decrypt(kp.sec, ct) == 0);
    }
    SUBCASE("boundary n-1") {
        mpz_class m = kp.pub.n - 1;
        CHECK(decrypt(kp.sec, encrypt(kp.pub, m, rng)) == m);
    }
    SUBCASE("1000 random plaintexts") {
        gmp_randclass grand(gmp_randinit_mt);
        grand.seed(123);
        for (int i = 0; i < 1000; ++i) {
            mpz_class m = grand.get_z_range(kp.pub.n);
            CHECK(decrypt(kp.sec, encrypt(kp.pub, m, rng)) == m);
        }
    }
}

TEST_CASE("encryption is probabilistic") {
    auto kp = test_keypair();
    Rng rng(13);
    for (int i = 0; i < 100; ++i) {
        auto a = encrypt(kp.pub, 5, rng);
        auto b = encrypt(kp.pub, 5, rng);
        CHECK(a.value != b.value);
        CHECK(decrypt(kp.sec, a) == 5);
        CHECK(decrypt(kp.sec, b) == 5);
    }
}

TEST_CASE("plaintext range is enforced") {
    auto kp = test_keypair();
    Rng rng(17);
    CHECK_THROWS_AS(encrypt(kp.pub, kp.pub.n, rng), RangeError);
    CHECK_THROWS_AS(encrypt(kp.pub, mpz_class(-1), rng), RangeError);
}

TEST_CASE("additive homomorphism") {
    auto kp = test_keypair();
    Rng rng(19);

    SUBCASE("small sums") {
        auto c = add(kp.pub, encrypt(kp.pub, 2, rng), encrypt(kp.pub, 3, rng));
        CHECK(decrypt(kp.sec, c) == 5);
        auto ident = add(kp.pub, encrypt(kp.pub, 42, rng), encrypt(kp.pub, 0, rng));
        CHECK(decrypt(kp.sec, ident) == 42);
    }
    SUBCASE("fold over a vector matches the plaintext sum") {
        std::vector<int> values{1, 2, 3, 4};
        long expected = 0;
        for (int v : values) expected += v;  // independent oracle
        Ciphertext acc = zero(kp.pub);
        for (int v : values) acc = add(kp.pub, acc, encrypt(kp.pub, v, rng));
        CHECK(decrypt(kp.sec, acc) == expected);
    }
    SUBCASE("1000 random pairs mod n") {
        gmp_randclass grand(gmp_randinit_mt);
        grand.seed(77);
        for (int i = 0; i < 1000; ++i) {
            mpz_class m1 = grand.get_z_range(kp.pub.n);
            mpz_class m2 = grand.get_z_range(kp.pub.n);
            auto c = add(kp.pub, encrypt(kp.pub, m1, rng), encrypt(kp.pub, m2, rng));
            CHECK(decrypt(kp.sec, c) == (m1 + m2) % kp.pub.n);
        }
    }
}

TEST_CASE("add rejects mismatched keys") {
    auto kp1 = test_keypair(512, 1);
    auto kp2 = test_keypair(512, 2);
    Rng rng(23);
    auto a = encrypt(kp1.pub, 1, rng);
    auto b = encrypt(kp2.pub, 1, rng);
    CHECK_THROWS_AS(add(kp1.pub, a, b), KeyMismatchError);
}

TEST_CASE("fixed-point codec") {
    auto kp = test_keypair();
    FixedPointCodec codec{16, kp.pub.n};

    CHECK(codec.encode(0.5) == 32768);
    CHECK(codec.encode(-0.5) == kp.pub.n - 32768);
    CHECK(codec.decode(codec.encode(-1.25)) == -1.25);

    SUBCASE("sum of encodings decodes exactly for representable values") {
        Rng rng(29);
        std::vector<double> values;
        double expected = 0.0;
        mpz_class sum = 0;
        for (int i = 0; i < 50; ++i) {
            double v = double(int64_t(rng.uniform(1 << 20)) - (1 << 19)) / 65536.0;
            values.push_back(v);
            expected += v;
            sum = (sum + codec.encode(v)) % kp.pub.n;
        }
        CHECK(codec.decode(sum) == expected);
    }
    SUBCASE("overflow is rejected") {
        double huge = std::ldexp(1.0, 600);
        CHECK_THROWS_AS(codec.encode(huge), RangeError);
    }
}

TEST_CASE("homomorphic sum of fixed-point leaves") {
    auto kp = test_keypair();
    FixedPointCodec codec{16, kp.pub.n};
    Rng rng(31);
    // 0.25 and -0.15625 are exactly representable at 2^-16
    auto a = encrypt(kp.pub, codec.encode(0.25), rng);
    auto b = encrypt(kp.pub, codec.encode(-0.15625), rng);
    auto sum = add(kp.pub, a, b);
    CHECK(codec.decode(decrypt(kp.sec, sum)) == 0.09375);
}

TEST_CASE("serialization round-trips") {
    auto kp = test_keypair();
    Rng rng(37);
    auto ct = encrypt(kp.pub, 12345, rng);

    auto ct2 = deserialize_ciphertext(serialize(ct), kp.pub.key_id);
    CHECK(decrypt(kp.sec, ct2) == 12345);

    auto pk2 = deserialize_public_key(serialize(kp.pub));
    CHECK(pk2.n == kp.pub.n);
    CHECK(pk2.key_id == kp.pub.key_id);

    auto sk2 = deserialize_secret_key(serialize(kp.sec));
    CHECK(decrypt(sk2, ct) == 12345);
}
