fn main() {
    let code = truthv::cli::run(std::env::args_os());
    std::process::exit(code);
}
