fn main() {
    std::process::exit(failspec::cli::main_with(std::env::args_os()));
}
