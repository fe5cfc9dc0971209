fn main() {
    std::process::exit(stochmed::cli::main_entry());
}
