// Test double for the external backend protocol: reads {input}, writes one
// <stem>.wav per requested stem into {output_dir}.

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <random>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>

#include "demix/wav_io.hpp"

int main(int argc, char** argv) {
  CLI::App app{"fake separator"};
  std::string input, output_dir, mode = "split";
  std::vector<std::string> stems;
  app.add_option("--input", input)->required();
  app.add_option("--output-dir", output_dir)->required();
  app.add_option("--stems", stems)->required()->delimiter(',');
  app.add_option("--mode", mode)
      ->check(CLI::IsMember({"split", "identity", "negate", "fail", "hang", "short", "missing", "garbage", "random"}));
  CLI11_PARSE(app, argc, argv);

  std::cout << "fake_separator: mode=" << mode << " input=" << input << '\n';
  if (mode == "fail") {
    std::cerr << "simulated model crash\n";
    return 3;
  }
  if (mode == "hang") {
    std::this_thread::sleep_for(std::chrono::seconds(60));
    return 0;
  }
  if (mode == "missing") return 0;

  const demix::Waveform x = demix::load_wav(input);
  const double share = 1.0 / static_cast<double>(stems.size());
  for (const auto& stem : stems) {
    const auto path = std::filesystem::path(output_dir) / (stem + ".wav");
    if (mode == "garbage") {
      std::FILE* f = std::fopen(path.c_str(), "wb");
      std::fputs("not a wav file", f);
      std::fclose(f);
      continue;
    }
    demix::Waveform y = x;
    if (mode == "split") y *= share;
    if (mode == "negate") y *= -1.0;
    if (mode == "short") y = x.slice(0, x.length() > 0 ? x.length() - 1 : 0);
    if (mode == "random") {
      std::random_device rd;
      y *= 0.5 + 0.5 * (rd() % 1000) / 1000.0;
    }
    demix::save_wav(y, path);
  }
  return 0;
}
