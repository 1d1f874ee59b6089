// chiron-server: hosts the serving enclave behind a TCP listener.
//
// The root key file holds the 32-byte Ed25519 seed of the platform's
// attestation root. A missing file is created with a fresh random seed so a
// first run needs no separate keygen step. The public half and the runtime
// measurement are printed on startup; clients use them as trust anchors.

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "chiron/app.hpp"
#include "chiron/service.hpp"
#include "chiron/tcp.hpp"

namespace {

std::optional<std::array<uint8_t, 32>> read_seed_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) return std::nullopt;
  std::array<uint8_t, 32> seed{};
  in.read(reinterpret_cast<char*>(seed.data()), seed.size());
  if (in.gcount() != static_cast<std::streamsize>(seed.size())) return std::nullopt;
  return seed;
}

bool write_seed_file(const std::string& path, const std::array<uint8_t, 32>& seed) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) return false;
  out.write(reinterpret_cast<const char*>(seed.data()), seed.size());
  return static_cast<bool>(out);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App cli{"chiron-server: enclave-backed training service"};
  std::string listen;
  std::string root_key_path;
  cli.add_option("--listen", listen, "address:port to listen on (port 0 = ephemeral)")
      ->required();
  cli.add_option("--root-key", root_key_path, "path to 32-byte Ed25519 root seed")->required();
  CLI11_PARSE(cli, argc, argv);

  auto ep = chiron::net::parse_endpoint(listen);
  if (!ep) {
    std::cerr << "chiron-server: bad --listen address: " << listen << "\n";
    return 2;
  }

  auto seed = read_seed_file(root_key_path);
  if (!seed) {
    std::array<uint8_t, 32> fresh{};
    chiron::crypto::system_random().fill(fresh);
    if (!write_seed_file(root_key_path, fresh)) {
      std::cerr << "chiron-server: cannot write root key file " << root_key_path << "\n";
      return 2;
    }
    std::cerr << "chiron-server: generated new root key at " << root_key_path << "\n";
    seed = fresh;
  }

  try {
    chiron::enclave::Platform platform(chiron::crypto::SigningKey::from_seed(*seed));
    chiron::app::ServingApp app(platform);

    if (const char* env = std::getenv("CHIRON_SEED")) {
      char* end = nullptr;
      const unsigned long long v = std::strtoull(env, &end, 10);
      if (end == env || *end != '\0') {
        std::cerr << "chiron-server: CHIRON_SEED must be a decimal integer\n";
        return 2;
      }
      app.set_seed_override(static_cast<uint64_t>(v));
      std::cerr << "chiron-server: CHIRON_SEED override active (" << v << ")\n";
    }

    chiron::service::Server server(app, ep->host, ep->port);
    std::cout << "listening " << ep->host << ":" << server.port() << "\n";
    std::cout << "root-pk " << chiron::hex_encode(platform.root_public_key()) << "\n";
    std::cout << "measurement " << chiron::app::runtime_measurement().hex() << "\n";
    std::cout.flush();
    server.run();
  } catch (const chiron::Error& e) {
    std::cerr << "chiron-server: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
