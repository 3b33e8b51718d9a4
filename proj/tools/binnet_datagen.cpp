// binnet-datagen: deterministic stand-in datasets in MNIST IDX and
// CIFAR-10 binary formats, for environments without the real files.
#include <cstdint>
#include <filesystem>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "binnet/data_io.hpp"

int main(int argc, char** argv) {
  CLI::App app{"generate synthetic datasets in MNIST/CIFAR-10 wire formats"};
  std::string dataset;
  std::string out_dir;
  std::int64_t train_count = 0;
  std::int64_t test_count = 0;
  std::uint64_t seed = 0;
  app.add_option("--dataset", dataset, "mnist or cifar10")
      ->required()
      ->check(CLI::IsMember({"mnist", "cifar10"}));
  app.add_option("--out", out_dir, "output directory")->required();
  app.add_option("--train", train_count,
                 "training images (default: 60000 mnist, 50000 cifar10)");
  app.add_option("--test", test_count, "test images (default: 10000)");
  app.add_option("--seed", seed, "generator seed");
  CLI11_PARSE(app, argc, argv);

  try {
    std::filesystem::create_directories(out_dir);
    if (dataset == "mnist") {
      if (train_count <= 0) train_count = 60000;
      if (test_count <= 0) test_count = 10000;
      binnet::write_synthetic_mnist(out_dir, train_count, test_count, seed);
    } else {
      if (train_count <= 0) train_count = 50000;
      if (test_count <= 0) test_count = 10000;
      binnet::write_synthetic_cifar10(out_dir, train_count, test_count, seed);
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  std::cout << "wrote " << dataset << " (" << train_count << " train, "
            << test_count << " test) to " << out_dir << "\n";
  return 0;
}
