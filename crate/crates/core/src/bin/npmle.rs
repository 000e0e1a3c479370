fn main() {
    std::process::exit(npmle_boost::cli::main());
}
