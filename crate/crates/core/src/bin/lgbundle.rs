fn main() {
    std::process::exit(lgbundle::cli::main_with(std::env::args_os()));
}
