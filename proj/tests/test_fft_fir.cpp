#include <catch2/catch_amalgamated.hpp>

#include "haaqinet/fft.hpp"
#include "haaqinet/fir.hpp"

using namespace haaqi;

TEST_CASE("fft round trip") {
  Rng rng(42);
  std::vector<double> x(1024);
  for (auto& v : x) v = rng.gaussian();
  auto half = rfft(x);
  auto back = irfft(half, x.size());
  for (std::size_t i = 0; i < x.size(); ++i)
    REQUIRE(back[i] == Catch::Approx(x[i]).margin(1e-12));
}

TEST_CASE("fft of a pure tone peaks at the right bin") {
  std::vector<double> x(512);
  for (std::size_t i = 0; i < x.size(); ++i)
    x[i] = std::sin(2.0 * M_PI * 32.0 * double(i) / 512.0);
  auto half = rfft(x);
  std::size_t argmax = 0;
  for (std::size_t k = 1; k < half.size(); ++k)
    if (std::abs(half[k]) > std::abs(half[argmax])) argmax = k;
  REQUIRE(argmax == 32);
}

TEST_CASE("unity-magnitude design is an exact identity") {
  auto h = design_fir([](double) { return 1.0; }, 16000.0, 255);
  Rng rng(7);
  std::vector<double> x(4000);
  for (auto& v : x) v = rng.uniform(-1, 1);
  auto y = filter_zero_phase(x, h);
  double err = 0, ref = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    err += (y[i] - x[i]) * (y[i] - x[i]);
    ref += x[i] * x[i];
  }
  REQUIRE(10.0 * std::log10(err / ref + 1e-300) < -200.0);
}

TEST_CASE("lowpass keeps the passband and kills the stopband") {
  auto h = design_lowpass(2000.0, 16000.0, 255);
  REQUIRE(fir_response_at(h, 16000.0, 1000.0) == Catch::Approx(1.0).margin(0.01));
  REQUIRE(fir_response_at(h, 16000.0, 4000.0) < 0.01);
}

TEST_CASE("highpass probe tones") {
  auto h = design_highpass(1000.0, 16000.0, 255);
  double low = fir_response_at(h, 16000.0, 250.0);
  double high = fir_response_at(h, 16000.0, 4000.0);
  REQUIRE(db(high / low) >= 24.0);
}

TEST_CASE("bandpass corners") {
  auto h = design_bandpass(500.0, 4000.0, 16000.0, 255);
  REQUIRE(fir_response_at(h, 16000.0, 1500.0) == Catch::Approx(1.0).margin(0.02));
  REQUIRE(fir_response_at(h, 16000.0, 100.0) < 0.02);
  REQUIRE(fir_response_at(h, 16000.0, 7000.0) < 0.02);
}
