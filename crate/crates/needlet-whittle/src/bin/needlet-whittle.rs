fn main() {
    std::process::exit(needlet_whittle::cli::main_exit_code());
}
