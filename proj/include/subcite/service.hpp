#pragma once

#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <thread>

#include "subcite/store.hpp"

namespace httplib {
class Server;
}

namespace subcite::service {

struct ServiceOptions {
  std::string cors_origin = "*";
  /// Built UI bundle served at "/".
  std::optional<std::filesystem::path> ui_dir;
};

/// Registers the REST routes on `server`.
void mount(httplib::Server& server, Store& store, const ServiceOptions& options = {});

/// Owns an httplib server bound to the store.
class Server {
 public:
  Server(Store& store, ServiceOptions options = {});
  ~Server();

  /// Binds (port 0 picks a free port) and serves on a background thread.
  /// Returns the bound port; throws Error when binding fails.
  int start(const std::string& host, int port);
  /// Binds and serves on the calling thread until stop().
  void run(const std::string& host, int port);
  void stop();

 private:
  std::unique_ptr<httplib::Server> server_;
  std::thread thread_;
};

}  // namespace subcite::service
