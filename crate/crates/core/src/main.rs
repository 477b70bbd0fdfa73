fn main() {
    std::process::exit(ma_iterate::cli::main_entry());
}
