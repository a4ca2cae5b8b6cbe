fn main() {
    std::process::exit(ktuplet::cli::run())
}
