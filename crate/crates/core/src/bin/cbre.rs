fn main() {
    std::process::exit(cbre::cli::main_entry());
}
